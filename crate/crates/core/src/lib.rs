pub mod calib;
pub mod density;
pub mod error;
pub mod features;
pub mod fusion;
pub mod geometry;
pub mod lifting;
pub mod raster;
pub mod registry;
pub mod resample;
pub mod seeded;
pub mod synth;
pub mod volume;
pub mod vpsampler;
pub mod vpzoomer;

pub use error::{Error, Result};
pub use geometry::{CameraModel, HomogeneousLine, Homography, Point2, Point3, Quad};
pub use lifting::pyramid::{FeatureMap, FeaturePyramid};
pub use raster::{DepthMap, ImageBuffer};
pub use volume::FeatureVolume;
pub use vpzoomer::ZoomGeometry;
