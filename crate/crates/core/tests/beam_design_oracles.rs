use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wpt_region::beam_design::{compute_phi_point, psi_of_w, sca_maximize_region, RegionOutcome, SatRegion};
use wpt_region::channel::{draw_channel_pair, ChannelConfig};
use wpt_region::linalg::{c, cx, CVec};
use wpt_region::{ChannelPair, RectennaParams, ScaOptions, Weights};

fn params() -> RectennaParams {
    RectennaParams::default()
}

#[test]
fn single_user_matches_matched_filter() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n_t in [2usize, 4] {
        for r in 0..20u64 {
            let cfg = ChannelConfig { n_t, seed: 100 + n_t as u64, ..Default::default() };
            let ch = draw_channel_pair(&cfg, r).unwrap();
            // stay strictly below single-user saturation
            let nu_sat = params().p_sat / ch.g1.norm_squared();
            let nu = rng.gen_range(0.05..0.95) * nu_sat;
            let pt = compute_phi_point(nu, &ch, Weights::new(1.0).unwrap(), &params(), &ScaOptions::default(), r).unwrap();
            let want = params().phi(nu * ch.g1.norm_squared()).unwrap();
            assert!(((pt.value - want) / want).abs() < 1e-4, "N_t={n_t} r={r}: {} vs {want}", pt.value);
        }
    }
}

#[test]
fn scalar_channel_has_no_design_freedom() {
    let ch = ChannelPair::new(CVec::from_vec(vec![cx(3e-4, -1e-4)]), CVec::from_vec(vec![cx(0.0, 6e-5)])).unwrap();
    for &xi in &[0.0, 0.2, 1.0] {
        let wts = Weights::new(xi).unwrap();
        for &nu in &[0.0, 3.0, 150.0, 4000.0] {
            let pt = compute_phi_point(nu, &ch, wts, &params(), &ScaOptions::default(), 1).unwrap();
            let want = xi * params().phi(ch.g1.norm_squared() * nu).unwrap()
                + (1.0 - xi) * params().phi(ch.g2.norm_squared() * nu).unwrap();
            assert!((pt.value - want).abs() <= 1e-12 * params().phi_sat());
            assert!((pt.w.norm_squared() - nu).abs() <= 1e-9 * nu.max(1.0));
        }
    }
}

#[test]
fn sca_sequences_never_decrease() {
    let cfg = ChannelConfig { n_t: 3, ..Default::default() };
    for r in 0..4u64 {
        let ch = draw_channel_pair(&cfg, r).unwrap();
        for &xi in &[0.1, 0.5, 0.9] {
            for &nu in &[1.0, 60.0, 400.0, 30000.0] {
                for (k, region) in SatRegion::ALL.into_iter().enumerate() {
                    let out = sca_maximize_region(region, nu, &ch, Weights::new(xi).unwrap(), &params(), &ScaOptions::default(), k as u64)
                        .unwrap();
                    match out {
                        RegionOutcome::Solved(run) => {
                            assert!(run.max_drop() <= 1e-9 * params().phi_sat(), "{region} nu={nu}: {:?}", run.trace);
                            // a discarded step may only undershoot by solver accuracy
                            assert!(run.rejected_drop <= 1e-6 * params().phi_sat(), "{region} nu={nu}: {}", run.rejected_drop);
                        }
                        RegionOutcome::Infeasible => {}
                        RegionOutcome::Failed(why) => panic!("{region} nu={nu}: {why}"),
                    }
                }
            }
        }
    }
}

#[test]
fn reported_value_is_psi_of_returned_beam() {
    let cfg = ChannelConfig { n_t: 4, ..Default::default() };
    let ch = draw_channel_pair(&cfg, 2).unwrap();
    let wts = Weights::new(0.35).unwrap();
    for &nu in &[0.5, 20.0, 250.0, 20000.0] {
        let pt = compute_phi_point(nu, &ch, wts, &params(), &ScaOptions::default(), 8).unwrap();
        assert!((psi_of_w(&pt.w, &ch, wts, &params()).unwrap() - pt.value).abs() <= 1e-9);
        assert!(pt.value <= params().phi_sat());
        assert!(pt.extracted_value <= pt.relaxed_value + 1e-6);
        assert!((pt.w.norm_squared() - nu).abs() <= 1e-8 * nu);
        assert!(pt.w[0].im == 0.0 && pt.w[0].re >= 0.0);
    }
}

#[test]
fn both_nodes_saturated_at_large_power() {
    let g1 = CVec::from_vec(vec![cx(2e-4, 0.0), cx(1e-4, 1e-4)]);
    let g2 = CVec::from_vec(vec![cx(-5e-5, 2e-5), cx(0.0, 8e-5)]);
    let ch = ChannelPair::new(g1.clone(), g2.clone()).unwrap();
    // a rank-one beam saturating both nodes: sum of the two matched filters
    let w = g1.map(|z| z.conj()) * c(1.0 / g1.norm()) + g2.map(|z| z.conj()) * c(1.0 / g2.norm());
    let need = (1..=2)
        .map(|m| {
            let g = if m == 1 { &g1 } else { &g2 };
            params().p_sat / wpt_region::linalg::received_power(g, &w)
        })
        .fold(0.0, f64::max);
    let nu = need * w.norm_squared() * 1.01;
    let pt = compute_phi_point(nu, &ch, Weights::new(0.5).unwrap(), &params(), &ScaOptions::default(), 4).unwrap();
    assert!((pt.value - params().phi_sat()).abs() <= 1e-9 * params().phi_sat());
}
