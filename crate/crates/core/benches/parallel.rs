//! Parallel against sequential execution of the data-parallel stages.
//! Build with `--no-default-features` to see both arms run sequentially.

use boardsight::chessio::{parse_fen, Perspective, Square};
use boardsight::cropper::{occupancy_crops, piece_crops, warp_image, CropConfig};
use boardsight::dataset::{labelled_samples, Samples};
use boardsight::image::Image;
use boardsight::nnet::{build_occupancy_net, predict, train, TrainRegimen};
use boardsight::parallel::Execution;
use boardsight::pipeline::{recognize_located, OracleClassifier, PipelineConfig};
use boardsight::synth::{render_scene, SynthConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const FEN: &str = "r1bqkb1r/pppp1ppp/2n2n2/4p3/2B1P3/5N2/PPPP1PPP/RNBQK2R";
const STRATEGIES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn samples() -> Samples {
    let scene = render_scene(FEN, &SynthConfig::default()).unwrap();
    labelled_samples(&scene.image, &scene.label, &CropConfig::default(), Execution::Sequential).unwrap()
}

fn cropping(c: &mut Criterion) {
    let scene = render_scene(FEN, &SynthConfig::default()).unwrap();
    let cfg = CropConfig::default();
    let h = scene.board_to_image.inverse().unwrap();
    let warped = warp_image(&scene.image, &h, &cfg).unwrap();
    let squares: Vec<Square> = Square::all().collect();
    let mut g = c.benchmark_group("crops");
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::new("occupancy_64", name), |b| b.iter(|| occupancy_crops(&warped, &squares, &cfg, exec)));
        g.bench_function(BenchmarkId::new("piece_64", name), |b| b.iter(|| piece_crops(&warped, &squares, &cfg, exec)));
    }
    g.finish();
}

fn inference(c: &mut Criterion) {
    let s = samples();
    let net = build_occupancy_net(0);
    let crops: Vec<&Image> = s.occupancy.iter().take(16).map(|o| &o.0).collect();
    let mut g = c.benchmark_group("occupancy_inference");
    g.sample_size(10);
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::new("16_crops", name), |b| b.iter(|| predict(&net, &crops, exec).unwrap()));
    }
    g.finish();
}

fn training(c: &mut Criterion) {
    let s = samples();
    let net = build_occupancy_net(0);
    let data: Vec<(Image, usize)> = s.occupancy.into_iter().take(64).collect();
    let mut regimen = TrainRegimen::standard(1, 0);
    regimen.batch_size = 64;
    let mut g = c.benchmark_group("occupancy_training");
    g.sample_size(10);
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::new("batch_64", name), |b| b.iter(|| train(&net, &data, &regimen, exec).unwrap()));
    }
    g.finish();
}

fn classification_stages(c: &mut Criterion) {
    let scene = render_scene(FEN, &SynthConfig::default()).unwrap();
    let oracle = OracleClassifier { position: parse_fen(FEN).unwrap() };
    let corners = boardsight::geometry::CornerSet::new(scene.label.corners.map(|[x, y]| boardsight::geometry::Point::new(x, y)));
    let mut g = c.benchmark_group("recognize_located");
    for (name, exec) in STRATEGIES {
        let cfg = PipelineConfig { parallel: exec == Execution::Parallel, ..PipelineConfig::default() };
        g.bench_function(BenchmarkId::new("oracle", name), |b| {
            b.iter(|| recognize_located(&scene.image, &corners, &oracle, Perspective::White, &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, cropping, inference, training, classification_stages);
criterion_main!(benches);
