use super::*;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

const TOL: f64 = 1e-10;

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b}");
}

fn beta22() -> ArmModel {
    ArmModel::scaled_beta(2.0, 2.0, 1.0, 1.0).unwrap()
}

#[test]
fn uniform_cvar_matches_closed_form() {
    let arm = ArmModel::uniform(0.0, 1.0, 1.0).unwrap();
    let spec = RiskSpec::cvar(0.5, 1.0).unwrap();
    close(arm.true_risk(&spec).unwrap(), 0.75, TOL);
}

#[test]
fn uniform_md_and_exp_shortfall() {
    let arm = ArmModel::uniform(0.0, 1.0, 1.0).unwrap();
    let md = RiskSpec::mean_deviation(1.0, 1.0, 1.0).unwrap();
    close(arm.true_risk(&md).unwrap(), 0.75, TOL);
    let sf = RiskSpec::shortfall(LossFunction::ExpMinusOne, 1.0).unwrap();
    close(
        arm.true_risk(&sf).unwrap(),
        (std::f64::consts::E - 1.0).ln(),
        TOL,
    );
}

#[test]
fn beta_one_one_agrees_with_uniform() {
    let beta = ArmModel::scaled_beta(1.0, 1.0, 1.0, 1.0).unwrap();
    let unif = ArmModel::uniform(0.0, 1.0, 1.0).unwrap();
    let specs = [
        RiskSpec::cvar(0.3, 1.0).unwrap(),
        RiskSpec::mean_deviation(0.7, 1.5, 1.0).unwrap(),
        RiskSpec::shortfall(LossFunction::ExpMinusOne, 1.0).unwrap(),
    ];
    for spec in &specs {
        close(
            beta.true_risk(spec).unwrap(),
            unif.true_risk(spec).unwrap(),
            TOL,
        );
    }
}

#[test]
fn beta_two_two_cvar_against_polynomial() {
    // F(x) = 3x^2 - 2x^3, x f(x) integrates to 2x^3 - 1.5x^4.
    let alpha: f64 = 0.8;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 3.0 * mid * mid - 2.0 * mid.powi(3) < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eta = hi;
    let prim = |x: f64| 2.0 * x.powi(3) - 1.5 * x.powi(4);
    let expected = (prim(1.0) - prim(eta)) / (1.0 - alpha);
    let spec = RiskSpec::cvar(alpha, 1.0).unwrap();
    close(beta22().true_risk(&spec).unwrap(), expected, TOL);
    close(beta22().quantile(alpha).unwrap(), eta, TOL);
}

#[test]
fn beta_two_two_md_and_exp_shortfall() {
    let md = RiskSpec::mean_deviation(1.0, 2.0, 1.0).unwrap();
    close(beta22().true_risk(&md).unwrap(), 0.5 + 0.05_f64.sqrt(), TOL);
    let sf = RiskSpec::shortfall(LossFunction::ExpMinusOne, 1.0).unwrap();
    let expected = (6.0 * (3.0 - std::f64::consts::E)).ln();
    close(beta22().true_risk(&sf).unwrap(), expected, TOL);
}

#[test]
fn piecewise_shortfall_root_and_sensitivity() {
    // -0.25 k^2 + (1 - k)^2 = 0 gives k = 2/3.
    let loss =
        LossFunction::PiecewiseLinear(PiecewiseLinear::new(vec![0.0], vec![0.5, 2.0]).unwrap());
    let arm = ArmModel::uniform(0.0, 1.0, 1.0).unwrap();
    let spec = RiskSpec::shortfall(loss.clone(), 1.0).unwrap();
    let o = arm.oracle(&spec).unwrap();
    close(o.true_risk, 2.0 / 3.0, TOL);
    close(o.shortfall_sensitivity.unwrap(), 1.0, TOL);
}

#[test]
fn identity_and_exp_sensitivity_is_one() {
    for arm in [beta22(), ArmModel::scaled_bernoulli(0.3, 0.8, 1.0).unwrap()] {
        for loss in [LossFunction::Identity, LossFunction::ExpMinusOne] {
            let spec = RiskSpec::shortfall(loss, 1.0).unwrap();
            close(
                arm.oracle(&spec).unwrap().shortfall_sensitivity.unwrap(),
                1.0,
                TOL,
            );
        }
    }
}

#[test]
fn bernoulli_oracles() {
    let arm = ArmModel::scaled_bernoulli(0.25, 0.8, 1.0).unwrap();
    close(arm.mean(), 0.2, 0.0);
    let md = RiskSpec::mean_deviation(1.0, 1.0, 1.0).unwrap();
    // E|X - 0.2| = 0.75 * 0.2 + 0.25 * 0.6
    close(arm.true_risk(&md).unwrap(), 0.2 + 0.3, TOL);
    let sf = RiskSpec::shortfall(LossFunction::ExpMinusOne, 1.0).unwrap();
    close(
        arm.true_risk(&sf).unwrap(),
        (0.75 + 0.25 * 0.8_f64.exp()).ln(),
        TOL,
    );
    assert_eq!(arm.quantile(0.75).unwrap(), 0.0);
    assert_eq!(arm.quantile(0.76).unwrap(), 0.8);
    let cvar = RiskSpec::cvar(0.5, 1.0).unwrap();
    assert!(matches!(
        arm.true_risk(&cvar),
        Err(Error::AssumptionViolated(_))
    ));
}

#[test]
fn quantile_at_zero_is_support_infimum() {
    let arm = ArmModel::uniform(0.2, 0.6, 1.0).unwrap();
    assert_eq!(arm.quantile(0.0).unwrap(), 0.2);
    assert_eq!(
        ArmModel::deterministic(0.4, 1.0)
            .unwrap()
            .quantile(0.0)
            .unwrap(),
        0.4
    );
}

#[test]
fn reciprocal_density() {
    let arm = ArmModel::uniform(0.0, 0.5, 1.0).unwrap();
    close(arm.reciprocal_density_at_quantile(0.5).unwrap(), 0.5, 1e-15);
    // 6 x (1 - x) at the median
    close(
        beta22().reciprocal_density_at_quantile(0.5).unwrap(),
        1.0 / 1.5,
        1e-9,
    );
    assert!(beta22().reciprocal_density_at_quantile(0.0).is_err());
}

#[test]
fn validation_rejects_bad_models() {
    assert!(ArmModel::uniform(0.5, 0.5, 1.0).is_err());
    assert!(ArmModel::uniform(0.0, 1.5, 1.0).is_err());
    assert!(ArmModel::scaled_beta(0.0, 1.0, 1.0, 1.0).is_err());
    assert!(ArmModel::scaled_beta(1.0, 1.0, 2.0, 1.0).is_err());
    assert!(ArmModel::scaled_bernoulli(1.2, 1.0, 1.0).is_err());
    assert!(ArmModel::deterministic(-0.1, 1.0).is_err());
    assert!(ArmModel::deterministic(0.1, 0.0).is_err());
}

#[test]
fn samples_stay_in_support() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
    let arms = [
        ArmModel::uniform(0.1, 0.4, 1.0).unwrap(),
        ArmModel::scaled_beta(0.5, 0.5, 0.9, 1.0).unwrap(),
        ArmModel::scaled_bernoulli(0.4, 0.7, 1.0).unwrap(),
    ];
    for arm in &arms {
        let (lo, hi) = arm.support();
        for _ in 0..2000 {
            let x = arm.sample(&mut rng);
            assert!((lo..=hi).contains(&x), "{x} outside [{lo}, {hi}]");
        }
    }
}

#[test]
fn set_level_constants() {
    let arms = [
        ArmModel::uniform(0.5, 1.0, 1.0).unwrap(),
        ArmModel::uniform(0.0, 0.5, 1.0).unwrap(),
    ];
    let spec = RiskSpec::cvar(0.5, 1.0).unwrap();
    let c = oracle_constants(&arms, &spec).unwrap();
    assert_eq!(c.optimal_arm, 1);
    close(c.gaps[0], 0.5, TOL);
    assert_eq!(c.gaps[1], 0.0);
    close(c.density_floor_inv.unwrap(), 0.5, 1e-15);
    let full = c.complete_spec(&spec).unwrap();
    assert_eq!(full.bounds.m_alpha, c.density_floor_inv);
}

#[test]
fn ties_are_rejected() {
    let arms = [
        ArmModel::uniform(0.0, 0.5, 1.0).unwrap(),
        ArmModel::uniform(0.0, 0.5, 1.0).unwrap(),
    ];
    let spec = RiskSpec::mean(1.0).unwrap();
    assert_eq!(
        oracle_constants(&arms, &spec).unwrap_err(),
        Error::NonUniqueOptimum {
            first: 1,
            second: 2
        }
    );
}
