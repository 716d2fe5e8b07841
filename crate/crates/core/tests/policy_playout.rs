use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wpt_region::channel::{draw_channel_pair, ChannelConfig};
use wpt_region::linalg::{c, cx, received_power};
use wpt_region::region::{average_powers, build_phi_curve, solve_policy, GridSpec, TwoPointPolicy};
use wpt_region::{ChannelPair, RectennaParams, ScaOptions, Weights};

/// Slot-by-slot playout: draw the beamformer with probability β / 1−β and a
/// uniformly random symbol phase every slot.
fn playout(policy: &TwoPointPolicy, ch: &ChannelPair, params: &RectennaParams, slots: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut e1, mut e2) = (0.0, 0.0);
    for _ in 0..slots {
        let w = if rng.gen::<f64>() < policy.beta { &policy.w1 } else { &policy.w2 };
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let x = w * cx(phase.cos(), phase.sin());
        e1 += params.phi(received_power(&ch.g1, &x)).unwrap();
        e2 += params.phi(received_power(&ch.g2, &x)).unwrap();
    }
    (e1 / slots as f64, e2 / slots as f64)
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

#[test]
fn average_powers_match_playout() {
    let params = RectennaParams::default();
    let cfg = ChannelConfig { n_t: 2, d1: 3.0, d2: 4.0, ..Default::default() };
    let ch = draw_channel_pair(&cfg, 0).unwrap();
    let curve = build_phi_curve(
        &ch,
        Weights::new(0.6).unwrap(),
        &params,
        &GridSpec { delta_rho: 0.01, n_rho: 100 },
        &ScaOptions::default(),
        3,
    )
    .unwrap();
    let policy = solve_policy(&curve, 0.15).unwrap();
    assert!(policy.mean_power() <= 0.15 + 1e-9);
    let (e1, e2) = average_powers(&policy, &ch, &params).unwrap();
    let (s1, s2) = playout(&policy, &ch, &params, 200_000, 17);
    assert!(rel(s1, e1) < 1e-2, "{s1:e} vs {e1:e}");
    assert!(rel(s2, e2) < 1e-2, "{s2:e} vs {e2:e}");
}

#[test]
fn symbol_phase_is_irrelevant() {
    let params = RectennaParams::default();
    let ch = draw_channel_pair(&ChannelConfig { n_t: 3, ..Default::default() }, 1).unwrap();
    let w = wpt_region::linalg::CVec::from_vec(vec![cx(3.0, 1.0), c(-2.0), cx(0.5, 4.0)]);
    let base = received_power(&ch.g1, &w);
    for k in 0..16 {
        let ph = k as f64 * 0.4;
        let rotated = &w * cx(ph.cos(), ph.sin());
        assert!((received_power(&ch.g1, &rotated) - base).abs() <= 1e-12 * base);
        assert!(params.phi(received_power(&ch.g1, &rotated)).is_ok());
    }
}
