use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{BasePose, NavError};
use crate::scalar::wrap_angle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate {
    pub estimated: BasePose,
    /// Simulation ground truth.
    pub true_pose: BasePose,
    /// Translation error injected by odometry since the last relocalization, m.
    pub accumulated_drift: f64,
}

impl PoseEstimate {
    pub fn exact(p: BasePose) -> Self {
        Self { estimated: p, true_pose: p, accumulated_drift: 0.0 }
    }

    pub fn position_error(&self) -> f64 {
        self.estimated.distance_to(&self.true_pose)
    }
}

/// Odometry increment expressed in the robot frame at the previous sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdomSample {
    pub t: f64,
    pub dx: f64,
    pub dy: f64,
    pub dyaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoSample {
    pub t: f64,
    pub pose: BasePose,
}

/// Applies a robot-frame increment to a pose.
pub fn integrate(p: &BasePose, dx: f64, dy: f64, dyaw: f64) -> BasePose {
    let (s, c) = p.yaw.sin_cos();
    BasePose::new(p.x + c * dx - s * dy, p.y + s * dx + c * dy, p.yaw + dyaw)
}

/// Moves `a` toward `b` by `alpha` (0 keeps `a`, 1 takes `b`).
pub fn blend(a: &BasePose, b: &BasePose, alpha: f64) -> BasePose {
    BasePose::new(a.x + alpha * (b.x - a.x), a.y + alpha * (b.y - a.y), a.yaw + alpha * wrap_angle(b.yaw - a.yaw))
}

/// Incremental complementary filter: odometry increments are integrated,
/// visual-odometry poses pull the estimate toward them by `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseFuser {
    pub estimate: BasePose,
    pub alpha: f64,
    last_t: f64,
}

impl PoseFuser {
    pub fn new(initial: BasePose, alpha: f64) -> Self {
        Self { estimate: initial, alpha, last_t: f64::NEG_INFINITY }
    }

    fn advance(&mut self, t: f64) -> Result<(), NavError> {
        if !(t >= self.last_t) {
            return Err(NavError::StreamError(format!("timestamp {t} precedes {}", self.last_t)));
        }
        self.last_t = t;
        Ok(())
    }

    pub fn odom(&mut self, s: &OdomSample) -> Result<BasePose, NavError> {
        self.advance(s.t)?;
        self.estimate = integrate(&self.estimate, s.dx, s.dy, s.dyaw);
        Ok(self.estimate)
    }

    pub fn vo(&mut self, s: &VoSample) -> Result<BasePose, NavError> {
        self.advance(s.t)?;
        self.estimate = blend(&self.estimate, &s.pose, self.alpha);
        Ok(self.estimate)
    }
}

/// Fuses both streams in timestamp order (odometry first on ties) and returns
/// the estimate after every odometry sample.
pub fn fuse_pose(initial: BasePose, odom: &[OdomSample], vo: &[VoSample], alpha: f64) -> Result<Vec<(f64, BasePose)>, NavError> {
    for w in odom.windows(2) {
        if !(w[1].t >= w[0].t) {
            return Err(NavError::StreamError("odometry timestamps not monotone".into()));
        }
    }
    for w in vo.windows(2) {
        if !(w[1].t >= w[0].t) {
            return Err(NavError::StreamError("visual odometry timestamps not monotone".into()));
        }
    }
    let mut f = PoseFuser::new(initial, alpha);
    let mut out = Vec::with_capacity(odom.len());
    let mut vi = 0;
    for s in odom {
        while vi < vo.len() && vo[vi].t < s.t {
            f.vo(&vo[vi])?;
            vi += 1;
        }
        out.push((s.t, f.odom(s)?));
    }
    Ok(out)
}

/// Resets the estimate to the true pose plus Gaussian noise (`sigma` per axis,
/// `sigma / 2` in yaw) and clears the accumulated drift.
pub fn relocalize(est: &PoseEstimate, sigma: f64, rng: &mut impl Rng) -> PoseEstimate {
    let t = est.true_pose;
    let estimated = if sigma > 0.0 {
        let n = Normal::new(0.0, sigma).expect("positive sigma");
        let ny = Normal::new(0.0, sigma / 2.0).expect("positive sigma");
        BasePose::new(t.x + n.sample(rng), t.y + n.sample(rng), t.yaw + ny.sample(rng))
    } else {
        t
    };
    PoseEstimate { estimated, true_pose: t, accumulated_drift: 0.0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_relocalize_is_exact() {
        let est = PoseEstimate {
            estimated: BasePose::new(1.1, 0.0, 0.0),
            true_pose: BasePose::new(1.0, 0.0, 0.0),
            accumulated_drift: 0.1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = relocalize(&est, 0.0, &mut rng);
        assert_eq!(r.estimated, r.true_pose);
        assert_eq!(r.accumulated_drift, 0.0);
        assert_eq!(r.position_error(), 0.0);
    }

    #[test]
    fn relocalize_noise_statistics() {
        let est = PoseEstimate::exact(BasePose::new(2.0, -1.0, 0.3));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<f64> = (0..10_000).map(|_| relocalize(&est, 0.01, &mut rng).estimated.x - 2.0).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt();
        assert!((std - 0.01).abs() < 0.001, "std {std}");
    }

    #[test]
    fn fusion_without_vo_is_integration() {
        let odom: Vec<OdomSample> = (1..=200).map(|k| OdomSample { t: k as f64 / 200.0, dx: 0.0025, dy: 0.0, dyaw: 0.001 }).collect();
        let fused = fuse_pose(BasePose::new(0.0, 0.0, 0.0), &odom, &[], 0.5).unwrap();
        let mut p = BasePose::new(0.0, 0.0, 0.0);
        for (s, (_, f)) in odom.iter().zip(&fused) {
            p = integrate(&p, s.dx, s.dy, s.dyaw);
            assert_eq!(p, *f);
        }
    }

    #[test]
    fn vo_blend_and_monotonicity() {
        let odom = [OdomSample { t: 0.1, dx: 0.0, dy: 0.0, dyaw: 0.0 }, OdomSample { t: 0.3, dx: 0.0, dy: 0.0, dyaw: 0.0 }];
        let vo = [VoSample { t: 0.2, pose: BasePose::new(1.0, 0.0, 0.0) }];
        let f = fuse_pose(BasePose::new(0.0, 0.0, 0.0), &odom, &vo, 0.5).unwrap();
        assert_eq!(f[1].1.x, 0.5);
        let bad = [OdomSample { t: 0.2, dx: 0.0, dy: 0.0, dyaw: 0.0 }, OdomSample { t: 0.1, dx: 0.0, dy: 0.0, dyaw: 0.0 }];
        assert!(matches!(fuse_pose(BasePose::new(0.0, 0.0, 0.0), &bad, &[], 0.5), Err(NavError::StreamError(_))));
    }
}
