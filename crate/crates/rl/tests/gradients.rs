use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safer_core::config::SacConfig;
use safer_rl::mlp::{Activation, Mlp};
use safer_rl::sac::{actor_gradient, SacState};

/// Relative error with an absolute floor for gradients that are ~0.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

#[test]
fn mlp_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut net = Mlp::new(&[367, 64, 2], Activation::Silu, &mut rng).unwrap();
    let batch = 3;
    let x: Vec<f64> = (0..batch * 367).map(|_| rng.random_range(-1.0..1.0)).collect();
    let g: Vec<f64> = (0..batch * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
    let loss = |net: &Mlp| -> f64 {
        let out = net.forward(&x, batch).unwrap();
        out.output().iter().zip(&g).map(|(o, w)| o * w).sum()
    };
    let cache = net.forward(&x, batch).unwrap();
    let (grads, dx) = net.backward(&cache, &g).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let i = rng.random_range(0..net.params.len());
        let p = net.params[i];
        net.params[i] = p + h;
        let up = loss(&net);
        net.params[i] = p - h;
        let down = loss(&net);
        net.params[i] = p;
        let fd = (up - down) / (2.0 * h);
        worst = worst.max(rel_err(grads[i], fd));
    }
    assert!(worst < 1e-4, "worst relative error {worst}");

    // Input gradient on a few coordinates as well.
    let mut x2 = x.clone();
    for i in [0, 100, 366, 367 + 5] {
        let xi = x2[i];
        let f = |x2: &[f64]| -> f64 {
            let out = net.forward(x2, batch).unwrap();
            out.output().iter().zip(&g).map(|(o, w)| o * w).sum()
        };
        x2[i] = xi + h;
        let up = f(&x2);
        x2[i] = xi - h;
        let down = f(&x2);
        x2[i] = xi;
        assert!(rel_err(dx[i], (up - down) / (2.0 * h)) < 1e-4);
    }
}

#[test]
fn every_activation_passes_gradient_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for act in [Activation::Tanh, Activation::Silu, Activation::Identity, Activation::Relu] {
        let mut net = Mlp::new(&[6, 9, 7, 3], act, &mut rng).unwrap();
        let x: Vec<f64> = (0..12).map(|_| rng.random_range(-2.0..2.0)).collect();
        let g: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cache = net.forward(&x, 2).unwrap();
        let (grads, _) = net.backward(&cache, &g).unwrap();
        let h = 1e-6;
        for i in 0..net.params.len() {
            let p = net.params[i];
            let f = |net: &Mlp| -> f64 {
                let o = net.forward(&x, 2).unwrap();
                o.output().iter().zip(&g).map(|(a, b)| a * b).sum()
            };
            net.params[i] = p + h;
            let up = f(&net);
            net.params[i] = p - h;
            let down = f(&net);
            net.params[i] = p;
            let fd = (up - down) / (2.0 * h);
            // ReLU kinks make differences unreliable right at zero.
            let tol = if act == Activation::Relu { 1e-3 } else { 1e-5 };
            assert!((grads[i] - fd).abs() < tol * (1.0 + fd.abs()), "{act:?} param {i}");
        }
    }
}

#[test]
fn actor_gradient_matches_finite_differences() {
    let cfg = SacConfig {
        hidden: vec![12, 12],
        initial_alpha: 0.3,
        ..SacConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut st = SacState::new(5, &cfg, &mut rng).unwrap();
    let n = 4;
    let obs: Vec<f64> = (0..n * 5).map(|_| rng.random_range(-1.0..1.0)).collect();
    // Reseeding replays the same noise, so the loss is a deterministic
    // function of the actor parameters.
    let eval = |st: &SacState| actor_gradient(st, &obs, n, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
    let base = eval(&st);
    let h = 1e-6;
    let mut checked = 0;
    for i in (0..st.actor.params.len()).step_by(3) {
        let p = st.actor.params[i];
        st.actor.params[i] = p + h;
        let up = eval(&st).loss;
        st.actor.params[i] = p - h;
        let down = eval(&st).loss;
        st.actor.params[i] = p;
        let fd = (up - down) / (2.0 * h);
        assert!(
            (base.grad[i] - fd).abs() < 1e-6 + 1e-4 * fd.abs(),
            "param {i}: analytic {} vs numeric {fd}",
            base.grad[i]
        );
        checked += 1;
    }
    assert!(checked > 50);
}
