//! Shared fixtures for the integration and acceptance suites.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sdnr::{Branch, Bus, BusKind, Network, Sample, ScenarioSet};

pub fn case(name: &str) -> Network {
    Network::from_file(format!("{}/../../cases/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

/// Nominal loading of the 33-bus case (kW, kvar), 0-based bus ids, in
/// per-unit on the case's 10 MVA base. Total 3715 kW / 2300 kvar.
pub fn ieee33_nominal_sample() -> Sample {
    const LOADS: [(usize, f64, f64); 32] = [
        (1, 100.0, 60.0),
        (2, 90.0, 40.0),
        (3, 120.0, 80.0),
        (4, 60.0, 30.0),
        (5, 60.0, 20.0),
        (6, 200.0, 100.0),
        (7, 200.0, 100.0),
        (8, 60.0, 20.0),
        (9, 60.0, 20.0),
        (10, 45.0, 30.0),
        (11, 60.0, 35.0),
        (12, 60.0, 35.0),
        (13, 120.0, 80.0),
        (14, 60.0, 10.0),
        (15, 60.0, 20.0),
        (16, 60.0, 20.0),
        (17, 90.0, 40.0),
        (18, 90.0, 40.0),
        (19, 90.0, 40.0),
        (20, 90.0, 40.0),
        (21, 90.0, 40.0),
        (22, 90.0, 50.0),
        (23, 420.0, 200.0),
        (24, 420.0, 200.0),
        (25, 60.0, 25.0),
        (26, 60.0, 25.0),
        (27, 60.0, 20.0),
        (28, 120.0, 70.0),
        (29, 200.0, 600.0),
        (30, 150.0, 70.0),
        (31, 210.0, 100.0),
        (32, 60.0, 40.0),
    ];
    let mut s = Sample::zeros("nominal", 33);
    for &(bus, p_kw, q_kvar) in &LOADS {
        s.p_d[bus] = p_kw / 10_000.0;
        s.q_d[bus] = q_kvar / 10_000.0;
    }
    s
}

/// Nominal sample scaled by a load factor, optionally perturbed per bus.
pub fn ieee33_scaled_sample(factor: f64, jitter: f64, rng: &mut ChaCha8Rng) -> Sample {
    let mut s = ieee33_nominal_sample();
    for i in 0..33 {
        let wobble = if jitter > 0.0 {
            1.0 + rng.random_range(-jitter..jitter)
        } else {
            1.0
        };
        s.p_d[i] *= factor * wobble;
        s.q_d[i] *= factor * wobble;
    }
    s
}

/// Randomized small feeder-style network: a trunk from the substation with
/// short laterals, plus `l` tie branches between distinct feeder points.
/// `n_buses` in 6..=12, substation at bus 0.
pub fn random_network(n_buses: usize, l: usize, rng: &mut ChaCha8Rng) -> Network {
    let buses: Vec<Bus> = (0..n_buses)
        .map(|id| Bus {
            id,
            kind: if id == 0 {
                BusKind::Substation
            } else {
                BusKind::NonSubstation
            },
            v_min: 0.5,
            v_max: 1.5,
            p_min: (id == 0).then_some(-10.0),
            p_max: (id == 0).then_some(10.0),
            q_min: (id == 0).then_some(-10.0),
            q_max: (id == 0).then_some(10.0),
        })
        .collect();
    let mut branches = Vec::new();
    let mut pairs = std::collections::BTreeSet::new();
    // trunk covering roughly half the buses, then laterals off random
    // trunk/earlier buses
    let trunk_len = (n_buses / 2).max(2);
    for to in 1..n_buses {
        let from = if to <= trunk_len {
            to - 1
        } else {
            rng.random_range(1..to)
        };
        pairs.insert((from.min(to), from.max(to)));
        branches.push(mk_branch(branches.len(), from, to, rng));
    }
    let mut added = 0;
    let mut attempts = 0;
    while added < l && attempts < 1000 {
        attempts += 1;
        let a = rng.random_range(0..n_buses);
        let b = rng.random_range(1..n_buses);
        if a == b {
            continue;
        }
        let key = (a.min(b), a.max(b));
        if pairs.contains(&key) {
            continue;
        }
        pairs.insert(key);
        branches.push(mk_branch(branches.len(), key.0, key.1, rng));
        added += 1;
    }
    let net = Network {
        base_mva: 10.0,
        buses,
        branches,
    };
    net.validate().unwrap();
    net
}

fn mk_branch(id: usize, from: usize, to: usize, rng: &mut ChaCha8Rng) -> Branch {
    // moderately homogeneous feeder segments
    let r = rng.random_range(0.02..0.05);
    let x = r * rng.random_range(0.8..1.5);
    let d = r * r + x * x;
    Branch {
        id,
        from,
        to,
        g: r / d,
        b: -x / d,
        s_max: 10.0,
        switchable: true,
    }
}

/// Two or three load scenarios with moderate spread for a random network.
pub fn random_scenarios(net: &Network, rng: &mut ChaCha8Rng) -> ScenarioSet {
    let n = net.n_buses();
    let n_scen = rng.random_range(2..=3);
    let base: Vec<f64> = (0..n)
        .map(|i| if i == 0 { 0.0 } else { rng.random_range(0.01..0.06) })
        .collect();
    let scenarios: Vec<Sample> = (0..n_scen)
        .map(|w| {
            let mut s = Sample::zeros(&format!("s{w}"), n);
            for i in 1..n {
                let f = rng.random_range(0.7..1.3);
                s.p_d[i] = base[i] * f;
                s.q_d[i] = 0.35 * s.p_d[i];
            }
            s
        })
        .collect();
    let mut pi: Vec<f64> = (0..n_scen).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    // renormalize exactly
    let drift: f64 = 1.0 - pi.iter().sum::<f64>();
    pi[0] += drift;
    ScenarioSet::new(scenarios, pi).unwrap()
}
