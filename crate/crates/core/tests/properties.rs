use esac_core::markov::{transition_matrix, ChannelModel};
use esac_core::stability::{
    certify, psi_a2, solve_certificate, spectral_radius, ContractionSpec, CriticalAlphaConfig,
    SPECTRAL_TOLERANCE,
};
use esac_core::Scheme;
use proptest::prelude::*;

fn pmf(weights: Vec<f64>) -> Vec<f64> {
    let s: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / s).collect()
}

prop_compose! {
    fn availability()(n_max in 1usize..=12)
        (w in prop::collection::vec(0.01f64..1.0, n_max + 1), q in 0.0f64..=1.0) -> (f64, Vec<f64>) {
        (q, pmf(w))
    }
}

prop_compose! {
    fn a2_config()((q, p) in availability())
        (eta in 1..=p.len() - 1, rho1 in 0.01f64..0.99, eps in 0.0f64..=1.0, q in Just(q), p in Just(p))
        -> (ChannelModel, usize, f64, f64) {
        (ChannelModel::new(q, p).unwrap(), eta, rho1, eps * rho1)
    }
}

proptest! {
    #[test]
    fn rows_sum_to_one((q, p) in availability(), eta_seed in 0usize..100) {
        let channel = ChannelModel::new(q, p).unwrap();
        let eta = 1 + eta_seed % channel.n_max();
        let chain = transition_matrix(channel.l(), eta).unwrap();
        for row in chain.pi().iter_rows() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(row.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn psi_is_linear_in_alpha((channel, eta, rho1, rho2) in a2_config(), alpha in 0.01f64..3.0, c in 0.1f64..5.0) {
        prop_assume!(eta >= 2);
        let spec = ContractionSpec::new(alpha, rho1, rho2, eta).unwrap();
        let a = psi_a2(&spec, channel.l()).unwrap();
        let b = psi_a2(&spec.with_alpha(c * alpha), channel.l()).unwrap();
        prop_assert!((b - c * a).abs() <= 1e-9 * (1.0 + b.abs()));
    }

    #[test]
    fn radius_is_monotone_in_alpha((channel, eta, rho1, rho2) in a2_config(), a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let cfg = CriticalAlphaConfig { scheme: Scheme::A2, eta, rho1, rho2, l: channel.l().to_vec() };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let r_lo = spectral_radius(&cfg.certification_matrix(lo).unwrap(), SPECTRAL_TOLERANCE).unwrap();
        let r_hi = spectral_radius(&cfg.certification_matrix(hi).unwrap(), SPECTRAL_TOLERANCE).unwrap();
        prop_assert!(r_lo <= r_hi + 1e-9, "{r_lo} > {r_hi}");
    }

    #[test]
    fn certificate_is_positive_when_schur(
        (channel, eta, rho1, rho2) in a2_config(),
        alpha in 0.0f64..2.0,
        nu in prop::collection::vec(0.1f64..10.0, 13),
    ) {
        let spec = ContractionSpec::new(alpha, rho1, rho2, eta).unwrap();
        let nu = &nu[..channel.n_max() + 1];
        let report = certify(Scheme::A2, &spec, &channel, Some(nu)).unwrap();
        if report.is_certified() {
            let zeta = solve_certificate(&report.t_matrix, nu).unwrap();
            prop_assert!(zeta.iter().all(|&z| z > 0.0));
            let tz = report.t_matrix.mul_vec(&zeta);
            for ((z, t), v) in zeta.iter().zip(&tz).zip(nu) {
                prop_assert!((z - t - v).abs() <= 1e-8 * z.abs().max(1.0));
            }
            let b = report.bounds.unwrap();
            prop_assert!((0.0..1.0).contains(&b.xi) && b.c1 >= 1.0 && b.c2 > 0.0);
        }
    }

    #[test]
    fn closed_form_sign_matches_radius((channel, eta, rho1, rho2) in a2_config(), alpha in 0.0f64..3.0) {
        let spec = ContractionSpec::new(alpha, rho1, rho2, eta).unwrap();
        let report = certify(Scheme::A2, &spec, &channel, None).unwrap();
        let closed = report.closed_form.unwrap().value;
        prop_assume!((report.spectral_radius - 1.0).abs() > 1e-9 && (closed - 1.0).abs() > 1e-9);
        prop_assert_eq!(closed < 1.0, report.spectral_radius < 1.0);
    }

    #[test]
    fn single_law_reduction((channel, _eta, rho1, _rho2) in a2_config(), alpha in 0.0f64..3.0) {
        let a2 = CriticalAlphaConfig { scheme: Scheme::A2, eta: 1, rho1, rho2: rho1, l: channel.l().to_vec() };
        let a1 = CriticalAlphaConfig { scheme: Scheme::A1, ..a2.clone() };
        let t2 = a2.certification_matrix(alpha).unwrap();
        let t1 = a1.certification_matrix(alpha).unwrap();
        prop_assert_eq!(&t1, &t2);
        prop_assert_eq!(
            spectral_radius(&t1, SPECTRAL_TOLERANCE).unwrap(),
            spectral_radius(&t2, SPECTRAL_TOLERANCE).unwrap()
        );
    }
}
