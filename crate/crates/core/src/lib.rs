pub mod adapt;
pub mod boardloc;
pub mod chessio;
pub mod cropper;
pub mod dataset;
pub mod geometry;
pub mod image;
pub mod nnet;
pub mod parallel;
pub mod pipeline;
pub mod rasterops;
pub mod synth;
