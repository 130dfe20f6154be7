//! Euler–Maruyama simulation of the two-boundary diffusion, for test data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use super::data::{Dataset, Row, StimulusClass};
use super::Theta;
use crate::error::DomainError;
use crate::params::{validate, Choice};

/// Simulated time after which a trial is abandoned and redrawn, in seconds.
pub const TRIAL_TIMEOUT: f64 = 120.0;

pub const DEFAULT_DT: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("time step {0} must be in (0, 1e-3]")]
    Step(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub dataset: Dataset,
    /// Trials that hit [`TRIAL_TIMEOUT`] and were redrawn.
    pub timeouts: usize,
}

/// Simulate `n_per_class` trials for each stimulus class, labelled with
/// participant `participant`. Deterministic given `seed`.
pub fn simulate(
    theta: &Theta,
    n_per_class: usize,
    seed: u64,
    dt: f64,
    participant: &str,
) -> Result<Simulation, SimError> {
    if !(dt > 0.0 && dt <= 1e-3) {
        return Err(SimError::Step(dt));
    }
    for class in [StimulusClass::C1, StimulusClass::C2] {
        validate(&theta.params(class))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_steps = (TRIAL_TIMEOUT / dt).ceil() as u64;
    let sqrt_dt = dt.sqrt();
    let mut rows = Vec::with_capacity(2 * n_per_class);
    let mut timeouts = 0;
    for class in [StimulusClass::C1, StimulusClass::C2] {
        let v = theta.v(class);
        let mut done = 0;
        while done < n_per_class {
            let z: f64 = rng.sample(StandardNormal);
            let drift = v + theta.eta * z;
            let mut x = theta.w * theta.a;
            let mut steps = 0u64;
            let choice = loop {
                if steps == max_steps {
                    break None;
                }
                let noise: f64 = rng.sample(StandardNormal);
                x += drift * dt + sqrt_dt * noise;
                steps += 1;
                if x <= 0.0 {
                    break Some(Choice::Lower);
                }
                if x >= theta.a {
                    break Some(Choice::Upper);
                }
            };
            match choice {
                Some(choice) => {
                    rows.push(Row {
                        participant: participant.to_string(),
                        stimulus_class: class,
                        choice,
                        rt: steps as f64 * dt + theta.t0,
                    });
                    done += 1;
                }
                None => timeouts += 1,
            }
        }
    }
    Ok(Simulation {
        dataset: Dataset::new(rows),
        timeouts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn theta(v1: f64, v2: f64) -> Theta {
        Theta {
            a: 1.0,
            v_c1: v1,
            v_c2: v2,
            w: 0.5,
            t0: 0.2,
            eta: 0.0,
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = simulate(&theta(1.0, -1.0), 50, 9, 1e-3, "p").unwrap();
        let b = simulate(&theta(1.0, -1.0), 50, 9, 1e-3, "p").unwrap();
        assert_eq!(a, b);
        let c = simulate(&theta(1.0, -1.0), 50, 10, 1e-3, "p").unwrap();
        assert_ne!(a.dataset, c.dataset);
        assert_eq!(a.dataset.count(StimulusClass::C1), 50);
        assert!(a.dataset.min_rt() > 0.2);
    }

    #[test]
    fn rejects_coarse_steps() {
        assert_eq!(
            simulate(&theta(0.0, 0.0), 1, 1, 2e-3, "p"),
            Err(SimError::Step(2e-3))
        );
    }

    #[test]
    fn drift_sign_mirrors_choice_fractions() {
        let s = simulate(&theta(2.0, -2.0), 4000, 3, 1e-4, "p").unwrap();
        let frac = |class, choice| {
            let rows: Vec<_> = s
                .dataset
                .rows
                .iter()
                .filter(|r| r.stimulus_class == class)
                .collect();
            rows.iter().filter(|r| r.choice == choice).count() as f64 / rows.len() as f64
        };
        let up1 = frac(StimulusClass::C1, Choice::Upper);
        let lo2 = frac(StimulusClass::C2, Choice::Lower);
        assert!(up1 > 0.7);
        // Binomial standard error is about 0.0065 per fraction.
        assert!((up1 - lo2).abs() < 0.03, "{up1} vs {lo2}");
    }
}
