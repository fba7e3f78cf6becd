use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdpolicy_core::optimizer::{loss_distribution, optimize_rule, welfare_loss, DEFAULT_PENALTY};
use sdpolicy_core::uncertainty::sample_prior;
use sdpolicy_core::{ModelSpec, PriorSpec, ParameterDraw, PolicyProblem, RuleCoefficients, RuleFamily};

fn problem(family: RuleFamily) -> PolicyProblem {
    PolicyProblem::new(&ModelSpec::nk3(), family).unwrap()
}

#[test]
fn passive_taylor_rule_is_penalised() {
    let p = problem(RuleFamily::Taylor);
    let phi = RuleCoefficients::defaults(RuleFamily::Taylor).with("phi_pi", 0.5).unwrap();
    assert_eq!(welfare_loss(&ParameterDraw::new(), &phi, &p).unwrap(), DEFAULT_PENALTY);
    let active = RuleCoefficients::defaults(RuleFamily::Taylor);
    let l = welfare_loss(&ParameterDraw::new(), &active, &p).unwrap();
    assert!(l > 0.0 && l < DEFAULT_PENALTY);
}

#[test]
fn taylor_optimum_beats_random_feasible_points() {
    let p = problem(RuleFamily::Taylor);
    let theta = ParameterDraw::new();
    let opt = optimize_rule(&theta, &p).unwrap();
    assert!(opt.determinate);
    assert!(p.bounds.contains(&opt.phi_min));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let free = p.bounds.free();
    for _ in 0..1000 {
        let mut phi = RuleCoefficients::defaults(RuleFamily::Taylor);
        for &i in &free {
            let u: f64 = rng.random();
            let v = p.bounds.lower[i] + u * (p.bounds.upper[i] - p.bounds.lower[i]);
            phi.set(&p.bounds.names[i], v).unwrap();
        }
        let l = welfare_loss(&theta, &phi, &p).unwrap();
        assert!(opt.loss <= l, "{} > {l} at {phi:?}", opt.loss);
    }
}

#[test]
fn augmented_growth_never_loses_to_constant_growth() {
    let spec = ModelSpec::nk3();
    let prior = PriorSpec::builtin("nk3").unwrap();
    let draws = sample_prior(&prior, 8, 42).unwrap();
    let aug = PolicyProblem::new(&spec, RuleFamily::AugmentedMoneyGrowth).unwrap();
    let con = PolicyProblem::new(&spec, RuleFamily::ConstantMoneyGrowth).unwrap();
    let (da, ra) = loss_distribution(&aug, &draws).unwrap();
    let (dc, rc) = loss_distribution(&con, &draws).unwrap();
    assert_eq!(da.dropped, 0);
    assert_eq!(dc.dropped, 0);
    for (a, c) in ra.iter().zip(&rc) {
        assert!(a.loss <= c.loss, "{} > {}", a.loss, c.loss);
    }
}

#[test]
fn scaling_weights_scales_losses() {
    let base = problem(RuleFamily::AugmentedMoneyGrowth);
    let mut scaled = base.clone();
    for w in scaled.weights.values_mut() {
        *w *= 3.0;
    }
    let theta = ParameterDraw::new();
    let a = optimize_rule(&theta, &base).unwrap();
    let b = optimize_rule(&theta, &scaled).unwrap();
    assert!((b.loss - 3.0 * a.loss).abs() <= 1e-9 * b.loss);
    for (name, v) in a.phi_min.iter() {
        assert!((b.phi_min.get(name).unwrap() - v).abs() < 1e-3, "{name}");
    }
}

#[test]
fn identical_draws_give_identical_atoms() {
    let p = problem(RuleFamily::ConstantMoneyGrowth);
    let draws = vec![ParameterDraw::new(), ParameterDraw::new()];
    let (d, _) = loss_distribution(&p, &draws).unwrap();
    assert_eq!(d.values.len(), 2);
    assert_eq!(d.values[0], d.values[1]);
    assert!((d.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
}
