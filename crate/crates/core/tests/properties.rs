use dynamix_core::mixture::CdfSampler;
use dynamix_core::{
    boltzmann_probs, ema_update, mixture_probs, prior_scaled_probs, BanditConfig,
    MixtureDistribution,
};
use proptest::prelude::*;

fn normalized(w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    let mut p: Vec<f64> = w.iter().map(|x| x / s).collect();
    let residual = 1.0 - p.iter().sum::<f64>();
    p[0] += residual;
    p
}

fn instance(max_k: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64, f64)> {
    (1usize..=max_k).prop_flat_map(|k| {
        (
            prop::collection::vec(-2.0f64..2.0, k),
            prop::collection::vec(1e-3f64..1.0, k),
            0.0f64..=10.0,
            0.0f64..=1.0,
        )
            .prop_map(|(q, w, beta, gamma)| (q, normalized(w), beta, gamma))
    })
}

fn cfg(k: usize, beta: f64, gamma: f64) -> BanditConfig {
    let mut c = BanditConfig::with_defaults(k, 100);
    c.beta = beta;
    c.gamma = gamma;
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn sums_to_one_and_respects_floor((q, prior, beta, gamma) in instance(64)) {
        let k = q.len();
        let p = mixture_probs(&q, &prior, &cfg(k, beta, gamma)).unwrap();
        prop_assert!((p.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for &pk in p.probs() {
            prop_assert!(pk >= gamma / k as f64 - 1e-12);
        }
    }

    #[test]
    fn shift_invariant((q, prior, beta, gamma) in instance(64), c in -50.0f64..50.0) {
        let k = q.len();
        let shifted: Vec<f64> = q.iter().map(|x| x + c).collect();
        let a = mixture_probs(&q, &prior, &cfg(k, beta, gamma)).unwrap();
        let b = mixture_probs(&shifted, &prior, &cfg(k, beta, gamma)).unwrap();
        for (x, y) in a.probs().iter().zip(b.probs()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn uniform_prior_reduces_to_softmax((q, _prior, beta, _gamma) in instance(64)) {
        let k = q.len();
        let uniform = vec![1.0 / k as f64; k];
        let a = prior_scaled_probs(&q, &uniform, beta).unwrap();
        let b = boltzmann_probs(&q, beta).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn closed_forms_at_the_extremes((q, prior, beta, gamma) in instance(64)) {
        let k = q.len();
        let at_zero_beta = mixture_probs(&q, &prior, &cfg(k, 0.0, gamma)).unwrap();
        for (p, pr) in at_zero_beta.probs().iter().zip(&prior) {
            prop_assert!((p - ((1.0 - gamma) * pr + gamma / k as f64)).abs() <= 1e-15);
        }
        let at_full_gamma = mixture_probs(&q, &prior, &cfg(k, beta, 1.0)).unwrap();
        for p in at_full_gamma.probs() {
            prop_assert_eq!(*p, 1.0 / k as f64);
        }
    }

    #[test]
    fn raising_one_q_raises_its_probability((q, prior, beta, gamma) in instance(16), arm in any::<prop::sample::Index>(), bump in 0.01f64..1.0) {
        prop_assume!(beta > 0.01 && gamma < 0.99);
        let k = q.len();
        prop_assume!(k > 1);
        let i = arm.index(k);
        let mut raised = q.clone();
        raised[i] += bump;
        let a = mixture_probs(&q, &prior, &cfg(k, beta, gamma)).unwrap();
        let b = mixture_probs(&raised, &prior, &cfg(k, beta, gamma)).unwrap();
        prop_assert!(b.probs()[i] > a.probs()[i]);
    }

    #[test]
    fn argmax_tracks_prior_at_zero_q((_q, prior, beta, gamma) in instance(32)) {
        let k = prior.len();
        let p = mixture_probs(&vec![0.0; k], &prior, &cfg(k, beta, gamma)).unwrap();
        let top = |v: &[f64]| (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
        prop_assert_eq!(p.probs()[top(p.probs())], p.probs()[top(&prior)]);
    }

    #[test]
    fn ema_stays_between_old_and_new(q in -10.0f64..10.0, r in -10.0f64..10.0, alpha in 0.0f64..1.0) {
        let next = ema_update(q, r, alpha);
        prop_assert!(next >= q.min(r) - 1e-12 && next <= q.max(r) + 1e-12);
    }

    #[test]
    fn ema_unrolls_to_closed_form(q0 in -1.0f64..1.0, rewards in prop::collection::vec(-1.0f64..1.0, 1..200), alpha in 0.0f64..1.0) {
        let iterated = rewards.iter().fold(q0, |q, &r| ema_update(q, r, alpha));
        let t = rewards.len() as i32;
        let closed = alpha.powi(t) * q0
            + (1.0 - alpha) * rewards.iter().enumerate().map(|(i, r)| alpha.powi(t - 1 - i as i32) * r).sum::<f64>();
        prop_assert!((iterated - closed).abs() <= 1e-10);
    }

    #[test]
    fn sampler_never_picks_zero_mass(w in prop::collection::vec(0.0f64..1.0, 1..32), u in 0.0f64..1.0) {
        prop_assume!(w.iter().any(|x| *x > 1e-6));
        let mut w = w;
        for x in w.iter_mut() {
            if *x < 0.2 {
                *x = 0.0;
            }
        }
        prop_assume!(w.iter().any(|x| *x > 0.0));
        let dist = MixtureDistribution::new(normalized_allow_zero(w)).unwrap();
        let k = CdfSampler::new(&dist).index_for(u);
        prop_assert!(dist.probs()[k] > 0.0);
    }
}

fn normalized_allow_zero(w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    let mut p: Vec<f64> = w.iter().map(|x| x / s).collect();
    let imax = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
    let residual = 1.0 - p.iter().sum::<f64>();
    p[imax] += residual;
    p
}
