//! Second-order Richardson extrapolation of two explicit Euler runs.

use crate::algebra::{OrthonormalFrame, PositionVector};
use crate::dynamics::{InitialDimerLength, Trajectory};
use crate::error::{Result, SsdError};

/// Extrapolated values on one coarse node. The directions are the plain
/// linear combination and are not unit length in general.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolatedState {
    pub n: usize,
    pub t: f64,
    pub x: PositionVector,
    pub v: Vec<PositionVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolatedTrajectory {
    pub states: Vec<ExtrapolatedState>,
    /// `(tau, tau / 2)` of the coarse and fine runs.
    pub source_taus: (f64, f64),
}

impl ExtrapolatedTrajectory {
    pub fn tau(&self) -> f64 {
        self.source_taus.0
    }

    /// The directions of node `n` passed through Gram-Schmidt. Errors are
    /// always measured on the raw combination; this is a convenience view.
    pub fn orthonormalized(&self, n: usize) -> Result<OrthonormalFrame> {
        let state = self
            .states
            .get(n)
            .ok_or_else(|| SsdError::input(format!("node {n} out of range")))?;
        Ok(OrthonormalFrame::orthonormalize(state.v.clone())?.0)
    }

    /// `max_n | |v^R_{i,n}| - 1 |` over all nodes and directions.
    pub fn max_norm_defect(&self) -> f64 {
        self.states
            .iter()
            .flat_map(|s| s.v.iter())
            .map(|v| (v.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

fn same_l0_rule(coarse: &Trajectory, fine: &Trajectory) -> bool {
    match (coarse.config.l0, fine.config.l0) {
        (InitialDimerLength::SqrtTau, InitialDimerLength::SqrtTau) => true,
        (InitialDimerLength::Fixed(a), InitialDimerLength::Fixed(b)) => a == b,
        _ => false,
    }
}

/// `x^R_n = 2 xf_{2n} - x_n`, `v^R_{i,n} = 2 vf_{i,2n} - v_{i,n}` on every
/// coarse node.
pub fn richardson_combine(
    coarse: &Trajectory,
    fine: &Trajectory,
) -> Result<ExtrapolatedTrajectory> {
    let (cc, fc) = (&coarse.config, &fine.config);
    if fc.tau != cc.tau / 2.0 {
        return Err(SsdError::input(format!(
            "fine tau {:e} must be exactly half the coarse tau {:e}",
            fc.tau, cc.tau
        )));
    }
    if fc.t_final != cc.t_final || fc.k != cc.k || fc.mode != cc.mode {
        return Err(SsdError::input(
            "coarse and fine runs use different T, k or mode",
        ));
    }
    if fc.beta != cc.beta || fc.gamma != cc.gamma || !same_l0_rule(coarse, fine) {
        return Err(SsdError::input(
            "coarse and fine runs use different relaxation parameters or l0 rule",
        ));
    }
    if fine.states.len() != 2 * coarse.states.len() - 1 {
        return Err(SsdError::input(format!(
            "grid mismatch: {} coarse nodes need {} fine nodes, got {}",
            coarse.states.len(),
            2 * coarse.states.len() - 1,
            fine.states.len()
        )));
    }
    let (c0, f0) = (coarse.initial_state(), fine.initial_state());
    if c0.x != f0.x || c0.frame != f0.frame {
        return Err(SsdError::input(
            "coarse and fine runs start from different states",
        ));
    }

    let states = coarse
        .states
        .iter()
        .map(|c| {
            let f = &fine.states[2 * c.n];
            ExtrapolatedState {
                n: c.n,
                t: c.t,
                x: &f.x * 2.0 - &c.x,
                v: f.frame
                    .vectors()
                    .iter()
                    .zip(c.frame.vectors())
                    .map(|(vf, vc)| vf * 2.0 - vc)
                    .collect(),
            }
        })
        .collect();
    Ok(ExtrapolatedTrajectory {
        states,
        source_taus: (cc.tau, fc.tau),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, SaddleConfig};
    use crate::problems::{stingray, ProblemKind};

    fn pair(tau: f64) -> (Trajectory, Trajectory) {
        let p = stingray();
        let ic = p.default_initial_condition(1).unwrap();
        let cfg = SaddleConfig::new(1, tau, ProblemKind::Gradient);
        (
            integrate(&p, &ic, &cfg).unwrap(),
            integrate(&p, &ic, &cfg.with_tau(tau / 2.0)).unwrap(),
        )
    }

    #[test]
    fn combines_on_coarse_grid() {
        let (c, f) = pair(0.125);
        let r = richardson_combine(&c, &f).unwrap();
        assert_eq!(r.states.len(), 9);
        assert_eq!(r.source_taus, (0.125, 0.0625));
        for (s, cs) in r.states.iter().zip(&c.states) {
            assert_eq!(s.t, cs.t);
            assert_eq!(s.x, &f.states[2 * s.n].x * 2.0 - &cs.x);
        }
        // node 0 is the shared initial state
        assert_eq!(r.states[0].x, c.states[0].x);
        assert!(r.orthonormalized(3).unwrap().orthonormality_defect() < 1e-14);
    }

    #[test]
    fn identical_values_are_unchanged() {
        let (c, f) = pair(0.125);
        let mut fake = f.clone();
        for (n, s) in c.states.iter().enumerate() {
            fake.states[2 * n].x = s.x.clone();
            fake.states[2 * n].frame = s.frame.clone();
        }
        let r = richardson_combine(&c, &fake).unwrap();
        for (s, cs) in r.states.iter().zip(&c.states) {
            assert_eq!(s.x, cs.x);
            assert_eq!(&s.v[..], cs.frame.vectors());
        }
    }

    #[test]
    fn rejects_mismatched_grids() {
        let (c, _) = pair(0.125);
        let (other, _) = pair(0.25);
        assert!(richardson_combine(&c, &c).is_err());
        assert!(richardson_combine(&other, &c).is_ok());
        let (c2, f2) = pair(0.125);
        let mut moved = f2.clone();
        moved.states[0].x[0] += 1.0;
        assert!(richardson_combine(&c2, &moved).is_err());
    }
}
