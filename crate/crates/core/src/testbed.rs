//! Small reproducible problem instances for tests, examples and benchmarks.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mdp::{Mdp, Policy};
use crate::objective::FeatureMap;

/// MDP plus a target policy, one behavior policy per agent and features.
#[derive(Debug, Clone)]
pub struct Instance {
    pub mdp: Mdp,
    pub target: Policy,
    pub behaviors: Vec<Policy>,
    pub features: FeatureMap,
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| floor + rng.gen::<f64>()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

fn random_policy(rng: &mut ChaCha8Rng, s: usize, a: usize, floor: f64) -> Policy {
    let mut p = DMatrix::zeros(s, a);
    for i in 0..s {
        let row = random_simplex(rng, a, floor);
        for (j, v) in row.into_iter().enumerate() {
            p[(i, j)] = v;
        }
    }
    Policy::new(p).expect("rows normalized")
}

/// Dense random MDP with strictly positive kernel, random rewards in `[-1, 1]`,
/// full-rank random features, a random target and `agents` behavior policies.
///
/// `spread` in `[0, 1]` controls how far the behavior policies stray from uniform;
/// `0` gives identical (uniform) behaviors.
pub fn random_instance(states: usize, actions: usize, m: usize, agents: usize, spread: f64, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kernel: Vec<DMatrix<f64>> = (0..actions)
        .map(|_| {
            let mut p = DMatrix::zeros(states, states);
            for i in 0..states {
                for (j, v) in random_simplex(&mut rng, states, 0.05).into_iter().enumerate() {
                    p[(i, j)] = v;
                }
            }
            p
        })
        .collect();
    let reward: Vec<DMatrix<f64>> =
        (0..actions).map(|_| DMatrix::from_fn(states, states, |_, _| rng.gen_range(-1.0..1.0))).collect();
    let mdp = Mdp::new(kernel, reward).expect("valid random MDP");
    let target = random_policy(&mut rng, states, actions, 0.2);
    let uniform = Policy::uniform(states, actions);
    let behaviors = (0..agents)
        .map(|_| {
            let r = random_policy(&mut rng, states, actions, 0.1);
            let mix = uniform.probs() * (1.0 - spread) + r.probs() * spread;
            Policy::new(mix).expect("convex mix of policies")
        })
        .collect();
    let features = random_features(&mut rng, states, m);
    Instance { mdp, target, behaviors, features }
}

fn random_features(rng: &mut ChaCha8Rng, states: usize, m: usize) -> FeatureMap {
    loop {
        let x = DMatrix::from_fn(states, m, |_, _| rng.gen_range(-1.0..1.0));
        if let Ok(f) = FeatureMap::new(x) {
            return f;
        }
    }
}

/// Chain of `states` cells with actions left/right; the intended move succeeds with
/// probability 0.9, otherwise the agent stays. Walls bounce back in place.
///
/// Reward on entering cell `j` is `cos(j)`. Behavior `k` moves right with probability
/// spread evenly in `[0.3, 0.7]` across agents; the target moves right with 0.6.
pub fn chain_instance(states: usize, m: usize, agents: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut left = DMatrix::zeros(states, states);
    let mut right = DMatrix::zeros(states, states);
    for s in 0..states {
        let l = s.saturating_sub(1);
        let r = (s + 1).min(states - 1);
        left[(s, l)] += 0.9;
        left[(s, s)] += 0.1;
        right[(s, r)] += 0.9;
        right[(s, s)] += 0.1;
    }
    let rew = DMatrix::from_fn(states, states, |_, j| (j as f64).cos());
    let mdp = Mdp::new(vec![left, right], vec![rew.clone(), rew]).expect("valid chain");
    let policy = |p_right: f64| {
        Policy::new(DMatrix::from_fn(states, 2, |_, a| if a == 1 { p_right } else { 1.0 - p_right }))
            .expect("two-point rows")
    };
    let behaviors = (0..agents)
        .map(|k| {
            let frac = if agents > 1 { k as f64 / (agents - 1) as f64 } else { 0.5 };
            policy(0.3 + 0.4 * frac)
        })
        .collect();
    let features = random_features(&mut rng, states, m);
    Instance { mdp, target: policy(0.6), behaviors, features }
}

/// Ten-cell chain split into halves `{0..4}` and `{5..9}` with actions left/stay/right.
///
/// The target never crosses between halves; behavior 0 lives in the first half and
/// behavior 1 in the second (from the other half each drifts back across the gap, so
/// its stationary mass sits on one half only). Features are the two half indicators plus
/// a position coordinate within the half, so a single agent cannot pin down the weight
/// of the half it never visits.
pub fn disjoint_halves_instance() -> Instance {
    let s = 10;
    let half = 5;
    let mut kernel = vec![DMatrix::zeros(s, s); 3];
    for st in 0..s {
        kernel[0][(st, st.saturating_sub(1))] = 1.0;
        kernel[1][(st, st)] = 1.0;
        kernel[2][(st, (st + 1).min(s - 1))] = 1.0;
    }
    let reward: Vec<DMatrix<f64>> = (0..3)
        .map(|_| DMatrix::from_fn(s, s, |_, j| 1.0 + ((j * 7) % 5) as f64 * 0.5 - if j >= half { 2.0 } else { 0.0 }))
        .collect();
    let mdp = Mdp::new(kernel, reward).expect("valid halves chain");
    let in_first = |st: usize| st < half;
    let crosses = |st: usize, a: usize| (st == half - 1 && a == 2) || (st == half && a == 0);
    let row_of = |allowed: &dyn Fn(usize, usize) -> bool, st: usize| {
        let acts: Vec<usize> = (0..3).filter(|&a| allowed(st, a)).collect();
        let mut row = [0.0; 3];
        for &a in &acts {
            row[a] = 1.0 / acts.len() as f64;
        }
        row
    };
    let build = |allowed: &dyn Fn(usize, usize) -> bool| {
        let mut p = DMatrix::zeros(s, 3);
        for st in 0..s {
            let row = row_of(allowed, st);
            for a in 0..3 {
                p[(st, a)] = row[a];
            }
        }
        Policy::new(p).expect("uniform over allowed actions")
    };
    let target = build(&|st, a| !crosses(st, a));
    // behavior 0 stays in the first half once there; from the second half it may cross back
    let phi0 = build(&|st, a| if in_first(st) { !crosses(st, a) } else { true });
    let phi1 = build(&|st, a| if !in_first(st) { !crosses(st, a) } else { true });
    let x = DMatrix::from_fn(s, 3, |st, j| match j {
        0 => f64::from(u8::from(in_first(st))),
        1 => f64::from(u8::from(!in_first(st))),
        _ => (st % half) as f64 / (half - 1) as f64,
    });
    Instance {
        mdp,
        target,
        behaviors: vec![phi0, phi1],
        features: FeatureMap::new(x).expect("indicator features have full rank"),
    }
}

/// Uniform stationary-like weighting for quick objective experiments.
pub fn uniform_weights(states: usize) -> DVector<f64> {
    DVector::from_element(states, 1.0 / states as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{induced_transition_matrix, stationary_distribution};

    #[test]
    fn halves_have_disjoint_support() {
        let inst = disjoint_halves_instance();
        for (k, phi) in inst.behaviors.iter().enumerate() {
            let d = stationary_distribution(&induced_transition_matrix(&inst.mdp, phi).unwrap(), 1e-12).unwrap();
            for st in 0..10 {
                let home = (st < 5) == (k == 0);
                assert_eq!(d[st] > 0.0, home, "agent {k} state {st}");
            }
        }
    }

    #[test]
    fn random_instance_is_reproducible() {
        let a = random_instance(5, 2, 2, 3, 0.5, 9);
        let b = random_instance(5, 2, 2, 3, 0.5, 9);
        assert_eq!(a.mdp, b.mdp);
        assert_eq!(a.features, b.features);
    }
}
