//! Mobile grocery-picking robot stack: world model, kinematics, precomputed
//! roadmap planning, navigation, grasping, task execution and campaign metrics.

pub mod drm;
pub mod executor;
pub mod geometry;
pub mod grasp;
pub mod kinematics;
pub mod metrics;
pub mod nav;
pub mod scalar;
pub mod worldmodel;

pub use scalar::Real;

/// Double-precision aliases used by the application layers.
pub type Vec3 = geometry::Vec3<f64>;
pub type Mat3 = geometry::Mat3<f64>;
pub type Isometry = geometry::Isometry<f64>;
pub type VoxelMap = worldmodel::VoxelMap<f64>;
pub type RobotModel = kinematics::RobotModel<f64>;
pub type IkParams = kinematics::IkParams<f64>;
