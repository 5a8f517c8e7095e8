//! Trajectory accuracy metrics and diagnostics export.

mod ate;
mod timeline;
mod trajectory;

pub use ate::{align_umeyama, associate, ate, ate_rmse, Alignment, AteOptions, AteResult, PosePair, DEFAULT_MAX_DT};
pub use timeline::{eigen_timeline, EigenRecord, EIGEN_TIMELINE_HEADER};
pub use trajectory::{StampedPose, Trajectory};
