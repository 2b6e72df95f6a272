//! Quick property checks runnable from the command line. The exhaustive
//! versions live in the test suite; these use fixed seeds and finish in a
//! few seconds.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::admm::{AdmmEngine, EngineSnapshot, HyperParams, Variant};
use crate::graph::{
    edge_budget, generate_network_clamped, metropolis_weights, ring_edge_count, NetworkGraph,
};
use crate::method::DecentralizedMethod;
use crate::objective::Objective;
use crate::problems::{synthesize_logistic, synthesize_ridge, RegressionKind, RegressionObjective};
use crate::rl::chain::TwoStateChain;
use crate::rl::exact::{exact_objective, exact_reinforce_mean};
use crate::rl::{grad_log_policy, policy_probs};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, outcome: std::result::Result<String, String>) -> Check {
    match outcome {
        Ok(detail) => Check {
            name,
            passed: true,
            detail,
        },
        Err(detail) => Check {
            name,
            passed: false,
            detail,
        },
    }
}

type Outcome = std::result::Result<String, String>;

fn graphs() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..200 {
        let n = rng.random_range(2..30);
        let omega = rng.random_range(0.01..=1.0);
        let g = generate_network_clamped(n, omega, trial).map_err(|e| e.to_string())?;
        let expected = edge_budget(n, omega).max(ring_edge_count(n));
        if !g.is_connected() || !g.cycle_is_hamiltonian() || g.edge_count() != expected {
            return Err(format!("n={n} omega={omega}: malformed graph"));
        }
        if NetworkGraph::from_text(&g.to_text()).map_err(|e| e.to_string())? != g {
            return Err(format!("n={n}: text round trip differs"));
        }
    }
    Ok("200 graphs connected, cycle Hamiltonian, text round trip exact".into())
}

fn mixing() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let n = 3 + (seed as usize % 15);
        let g = generate_network_clamped(n, 0.3, seed).map_err(|e| e.to_string())?;
        let w = metropolis_weights(&g).to_nalgebra();
        if (&w - w.transpose()).amax() > 1e-15 {
            return Err(format!("seed {seed}: not symmetric"));
        }
        for i in 0..n {
            if (w.row(i).sum() - 1.0).abs() > 1e-12 || w.row(i).iter().any(|&x| x < 0.0) {
                return Err(format!("seed {seed}: row {i} not stochastic"));
            }
        }
        let centred = w - DMatrix::from_element(n, n, 1.0 / n as f64);
        let radius = SymmetricEigen::new(centred)
            .eigenvalues
            .iter()
            .fold(0.0f64, |a, &l| a.max(l.abs()));
        if radius >= 1.0 {
            return Err(format!("seed {seed}: spectral radius {radius}"));
        }
        worst = worst.max(radius);
    }
    Ok(format!(
        "50 networks doubly stochastic, worst radius {worst:.4}"
    ))
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

fn gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ridge = synthesize_ridge(1, 30, 4, 0.1, 1)
        .map_err(|e| e.to_string())?
        .0;
    let logistic = synthesize_logistic(1, 30, 4, 2)
        .map_err(|e| e.to_string())?
        .0;
    let objs = [
        RegressionObjective::new(RegressionKind::Ridge, Arc::new(ridge[0].clone()), 0.1),
        RegressionObjective::new(RegressionKind::Logistic, Arc::new(logistic[0].clone()), 0.1),
    ];
    let mut worst: f64 = 0.0;
    for obj in objs {
        let obj = obj.map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let theta: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let g = obj.full_gradient(&theta).ok_or("no gradient")?;
            for d in 0..4 {
                let h = 1e-6;
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[d] += h;
                tm[d] -= h;
                let fd = (obj.loss(&tp).unwrap() - obj.loss(&tm).unwrap()) / (2.0 * h);
                worst = worst.max(rel_err(fd, g[d]));
            }
        }
    }
    let mdp = TwoStateChain::default();
    for _ in 0..20 {
        let theta: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        for s in 0..2usize {
            for a in 0..2 {
                let g = grad_log_policy(&theta, &s, a, &mdp);
                for d in 0..4 {
                    let h = 1e-6;
                    let mut tp = theta.clone();
                    let mut tm = theta.clone();
                    tp[d] += h;
                    tm[d] -= h;
                    let fd = (policy_probs(&tp, &s, &mdp)[a].ln()
                        - policy_probs(&tm, &s, &mdp)[a].ln())
                        / (2.0 * h);
                    if (fd - g[d]).abs() > 1e-6 * g[d].abs().max(1.0) {
                        return Err(format!("score function coordinate {d}: {fd} vs {}", g[d]));
                    }
                }
            }
        }
    }
    if worst > 1e-5 {
        return Err(format!("worst relative error {worst:.2e}"));
    }
    Ok(format!(
        "ridge/logistic worst relative error {worst:.2e}; score function within 1e-6"
    ))
}

fn reinforce() -> Outcome {
    let mdp = TwoStateChain::default();
    let theta = [0.3, -0.7, 0.5, 0.1];
    let g = exact_reinforce_mean(&mdp, &theta, 3).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for d in 0..4 {
        let h = 1e-6;
        let mut tp = theta;
        let mut tm = theta;
        tp[d] += h;
        tm[d] -= h;
        let fd = (exact_objective(&mdp, &tp, 3) - exact_objective(&mdp, &tm, 3)) / (2.0 * h);
        worst = worst.max((fd - g[d]).abs());
    }
    if worst > 1e-6 {
        return Err(format!("exact REINFORCE mean off by {worst:.2e}"));
    }
    Ok(format!(
        "exact estimator mean matches finite difference within {worst:.1e}"
    ))
}

fn ridge_engine(variant: Variant, eta_bar: f64, seed: u64) -> crate::Result<AdmmEngine> {
    let n = 8;
    let g = Arc::new(generate_network_clamped(n, 0.4, seed)?);
    let objs: Vec<Arc<dyn Objective>> = synthesize_ridge(n, 40, 3, 0.1, seed)?
        .0
        .into_iter()
        .map(|d| {
            RegressionObjective::new(RegressionKind::Ridge, Arc::new(d), 0.0)
                .map(|o| Arc::new(o) as Arc<dyn Objective>)
        })
        .collect::<crate::Result<_>>()?;
    let hp = HyperParams::new(3.0, 0.5, 0.5, eta_bar, 10.0, 4)?;
    AdmmEngine::new(g, objs, hp, variant, seed)
}

fn engine() -> Outcome {
    let e = |r: crate::Result<()>| r.map_err(|e| e.to_string());
    let mut a = ridge_engine(Variant::Adaptive, 0.9, 3).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for _ in 0..2000 {
        e(a.step())?;
        worst = worst.max(a.z_identity_residual());
    }
    if worst > 1e-9 {
        return Err(format!("token identity residual {worst:.2e}"));
    }

    let mut b = ridge_engine(Variant::Adaptive, 0.9, 3).map_err(|e| e.to_string())?;
    for _ in 0..2000 {
        e(b.step())?;
    }
    if a.snapshot().to_json() != b.snapshot().to_json() {
        return Err("identical seeds diverged".into());
    }

    let snap = EngineSnapshot::from_json(&a.snapshot().to_json()).map_err(|e| e.to_string())?;
    let mut resumed = ridge_engine(Variant::Adaptive, 0.9, 3).map_err(|e| e.to_string())?;
    for _ in 0..37 {
        e(resumed.step())?;
    }
    resumed.restore(&snap).map_err(|e| e.to_string())?;
    for _ in 0..100 {
        e(a.step())?;
        e(resumed.step())?;
    }
    if a.snapshot().to_json() != resumed.snapshot().to_json() {
        return Err("resumed engine differs from uninterrupted run".into());
    }

    let mut plain = ridge_engine(Variant::Stochastic, 0.0, 4).map_err(|e| e.to_string())?;
    let mut capped = ridge_engine(Variant::Adaptive, 0.0, 4).map_err(|e| e.to_string())?;
    for _ in 0..500 {
        e(plain.step())?;
        e(capped.step())?;
    }
    let same = (0..plain.agent_count()).all(|i| plain.theta(i) == capped.theta(i));
    if !same || plain.consensus_parameter() != capped.consensus_parameter() {
        return Err("zero EMA cap does not reproduce the plain stochastic variant".into());
    }
    Ok(format!(
        "token identity residual {worst:.1e}; deterministic; snapshot resume exact; zero cap reduces to plain variant"
    ))
}

/// Runs every check.
pub fn run_all() -> Vec<Check> {
    vec![
        check("graph construction", graphs()),
        check("mixing matrix", mixing()),
        check("gradient oracles", gradients()),
        check("REINFORCE unbiasedness", reinforce()),
        check("ADMM engine invariants", engine()),
    ]
}
