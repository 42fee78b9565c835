use super::{ArqCoefficient, PowerSchedule, Scheme, SystemConfig};
use crate::error::Result;
use crate::specfun::log_gamma;

/// Coefficient `W_l` of the high-SNR leading term `W_l / ∏_{k≤l} P_kᴺ`.
///
/// * ARQ: `Z^{lN} / Γ(N+1)^l` (or `Z^{lN} / N^l` with [`ArqCoefficient::AntennaPower`])
/// * CC-HARQ: `Z^{lN} / Γ(lN+1)`
/// * IR-HARQ: `Y(l)^{lN} / Γ(lN+1)`
///
/// `W_0 = 1`. Depends only on scheme, `N`, `R` and `l`.
pub fn gpp_coefficient(config: &SystemConfig, rounds: usize) -> f64 {
    if rounds == 0 {
        return 1.0;
    }
    let n = config.shape();
    let l = rounds as f64;
    let ln_z = config.threshold().ln();
    let ln_w = match config.scheme {
        Scheme::Arq => {
            let ln_norm = match config.arq_coefficient {
                ArqCoefficient::Series => log_gamma(n + 1.0).expect("N + 1 > 0"),
                ArqCoefficient::AntennaPower => n.ln(),
            };
            l * n * ln_z - l * ln_norm
        }
        Scheme::Cc => l * n * ln_z - log_gamma(l * n + 1.0).expect("lN + 1 > 0"),
        Scheme::Ir => l * n * config.jensen_threshold(rounds).ln() - log_gamma(l * n + 1.0).expect("lN + 1 > 0"),
    };
    ln_w.exp()
}

/// `[W_0, W_1, ..., W_L]`.
pub fn gpp_coefficients(config: &SystemConfig) -> Vec<f64> {
    (0..=config.max_rounds).map(|l| gpp_coefficient(config, l)).collect()
}

/// Leading asymptotic term `W_l / ∏_{k≤l} P_kᴺ`.
///
/// Not clamped: at low power the value can exceed 1, and the closed-form
/// power allocation relies on the unclamped expression.
pub fn outage_asymptotic(config: &SystemConfig, schedule: &PowerSchedule, rounds: usize) -> Result<f64> {
    config.check_schedule(schedule)?;
    config.check_rounds(rounds)?;
    let n = config.shape();
    let log_power_product: f64 = schedule.powers()[..rounds].iter().map(|p| p.ln()).sum();
    Ok(gpp_coefficient(config, rounds) * (-n * log_power_product).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outage::{cc_outage_exact, outage, OutageMethod};

    #[test]
    fn single_round_coincides_across_schemes() {
        for n in [1, 2, 3, 5] {
            let s = PowerSchedule::new(vec![17.0]).unwrap();
            let want = 3f64.powi(n as i32) / (1..=n).product::<u32>() as f64 / 17f64.powi(n as i32);
            for scheme in Scheme::ALL {
                let c = SystemConfig::new(scheme, n, 1, 2.0, 10.0).unwrap();
                let got = outage_asymptotic(&c, &s, 1).unwrap();
                assert!(((got - want) / want).abs() < 1e-13, "{scheme} N={n}");
            }
        }
    }

    #[test]
    fn cc_two_round_example() {
        let c = SystemConfig::new(Scheme::Cc, 2, 2, 2.0, 10.0).unwrap();
        let s = PowerSchedule::new(vec![100.0, 100.0]).unwrap();
        let got = outage_asymptotic(&c, &s, 2).unwrap();
        assert!(((got - 3.375e-8) / 3.375e-8).abs() < 1e-12);
        let exact = cc_outage_exact(&c, &s, 2).unwrap();
        assert!((exact / got - 1.0).abs() < 0.1);
    }

    #[test]
    fn coefficient_conventions() {
        let base = SystemConfig::new(Scheme::Arq, 2, 2, 2.0, 10.0).unwrap();
        let alt = base.clone().with_arq_coefficient(ArqCoefficient::AntennaPower);
        // Γ(3) = 2 = N, so both conventions give W_1 = 9/2 and W_2 = 81/4.
        assert!((gpp_coefficient(&base, 1) - 4.5).abs() < 1e-13);
        assert!((gpp_coefficient(&alt, 1) - 4.5).abs() < 1e-13);
        assert!((gpp_coefficient(&base, 2) - 20.25).abs() < 1e-12);
        let base4 = SystemConfig::new(Scheme::Arq, 4, 2, 2.0, 10.0).unwrap();
        let alt4 = base4.clone().with_arq_coefficient(ArqCoefficient::AntennaPower);
        // Γ(5)^2 = 576 versus 4^2 = 16.
        let ratio = gpp_coefficient(&alt4, 2) / gpp_coefficient(&base4, 2);
        assert!((ratio - 36.0).abs() < 1e-10);
        assert_eq!(gpp_coefficients(&base)[0], 1.0);
    }

    #[test]
    fn exact_over_asymptotic_settles() {
        // ARQ and CC approach 1; IR approaches a constant above 1 because its
        // coefficient comes from the Jensen bound rather than the true tail.
        for scheme in Scheme::ALL {
            let c = SystemConfig::new(scheme, 2, 2, 2.0, 10.0).unwrap();
            let mut ratios = Vec::new();
            for scale in [1.0, 10.0, 100.0, 1000.0] {
                let s = PowerSchedule::new(vec![20.0 * scale, 45.0 * scale]).unwrap();
                let exact = outage(&c, &s, 2, OutageMethod::Exact).unwrap();
                let asym = outage(&c, &s, 2, OutageMethod::Asymptotic).unwrap();
                ratios.push(exact / asym);
            }
            let steps: Vec<f64> = ratios.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
            assert!(steps.windows(2).all(|w| w[1] < w[0]), "{scheme}: {ratios:?}");
            let last = *ratios.last().unwrap();
            match scheme {
                Scheme::Ir => assert!(last > 1.0 && last < 2.0, "{scheme}: {ratios:?}"),
                _ => assert!((last - 1.0).abs() < 0.01, "{scheme}: {ratios:?}"),
            }
        }
    }
}
