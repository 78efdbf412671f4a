//! Text and CSV rendering. Numbers use 12 significant digits in `%g` style;
//! lines end in `\n`.

use std::fmt::Write as _;
use std::io::{self, Write};

use crate::config::RunConfig;
use crate::simulate::{MonteCarloResult, Trajectory};
use crate::stability::{CertificationReport, ClosedFormKind, CriticalAlpha};
use crate::sweep::BoundaryPoint;

const SIGNIFICANT: usize = 12;

/// `%.12g`: fixed notation for exponents in `-4..12`, scientific otherwise,
/// trailing zeros removed.
pub fn fmt_g(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", SIGNIFICANT - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIGNIFICANT as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (SIGNIFICANT as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| fmt_g(*x)).collect::<Vec<_>>().join(" ")
}

pub fn write_sweep_csv<W: Write>(mut out: W, points: &[BoundaryPoint]) -> io::Result<()> {
    writeln!(out, "rho1,alpha_star_closed,alpha_star_spectral")?;
    for p in points {
        writeln!(
            out,
            "{},{},{}",
            fmt_g(p.rho1),
            fmt_g(p.alpha_star_closed),
            fmt_g(p.alpha_star_spectral)
        )?;
    }
    Ok(())
}

/// One row per `k` in `0..=horizon`; the trigger rate at `k = horizon` is
/// the fraction of runs outside the threshold at the final state.
pub fn write_simulation_csv<W: Write>(mut out: W, result: &MonteCarloResult) -> io::Result<()> {
    writeln!(out, "k,mean_v,trigger_rate")?;
    for (k, (v, t)) in result.mean_v.iter().zip(&result.trigger_rate_by_step).enumerate() {
        writeln!(out, "{k},{},{}", fmt_g(*v), fmt_g(*t))?;
    }
    Ok(())
}

pub fn write_trajectory_csv<W: Write>(mut out: W, trajectory: &Trajectory) -> io::Result<()> {
    writeln!(out, "k,x,u,gamma,N,F,C,v")?;
    for s in &trajectory.steps {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.k,
            fmt_g(s.x),
            fmt_g(s.u),
            s.gamma,
            s.n,
            s.fine,
            s.coarse,
            fmt_g(s.v)
        )?;
    }
    Ok(())
}

pub fn format_report(
    cfg: &RunConfig,
    report: &CertificationReport,
    critical: Option<&CriticalAlpha>,
) -> String {
    let mut s = String::new();
    let spec = cfg.contraction_spec().ok();
    let _ = writeln!(s, "scheme            {}", report.scheme);
    if let Some(spec) = spec {
        let _ = writeln!(
            s,
            "parameters        alpha={} rho1={} rho2={} eta={} sigma_open={} d={}",
            fmt_g(spec.alpha),
            fmt_g(spec.rho1),
            fmt_g(spec.rho2),
            spec.eta,
            fmt_g(spec.sigma_open),
            fmt_g(spec.d_bound)
        );
    }
    let _ = writeln!(s, "channel           q={} p=[{}]", fmt_g(cfg.q), join(&cfg.p));
    let _ = writeln!(s, "gains             [{}]", join(&report.phi));
    let _ = writeln!(s, "spectral_radius   {}", fmt_g(report.spectral_radius));
    match report.closed_form {
        Some(c) => {
            let name = match c.kind {
                ClosedFormKind::Psi => "psi",
                ClosedFormKind::Omega => "omega",
            };
            let _ = writeln!(s, "{name:<17} {}", fmt_g(c.value));
        }
        None => {
            let _ = writeln!(s, "closed_form       unavailable (a contraction is not below 1)");
        }
    }
    if let Some(c) = critical {
        let _ = writeln!(
            s,
            "alpha_star        closed={} spectral={}",
            fmt_g(c.closed),
            fmt_g(c.spectral)
        );
    }
    let _ = writeln!(s, "nu                [{}]", join(&report.nu));
    if let Some(z) = &report.zeta {
        let _ = writeln!(s, "zeta              [{}]", join(z));
    }
    if let Some(b) = &report.bounds {
        let _ = writeln!(
            s,
            "bound             E V_k <= {} * {}^k * E V_0 + {}",
            fmt_g(b.c1),
            fmt_g(b.xi),
            fmt_g(b.c2)
        );
    }
    for w in &report.warnings {
        let _ = writeln!(s, "warning           {w}");
    }
    let verdict = if report.is_certified() { "CERTIFIED STABLE" } else { "NOT CERTIFIED" };
    let _ = writeln!(s, "verdict           {verdict}");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_format() {
        let cases = [
            (1.0, "1"),
            (0.5, "0.5"),
            (1.3526556776556766, "1.35265567766"),
            (-2.25, "-2.25"),
            (1e-5, "1e-05"),
            (1.5e-7, "1.5e-07"),
            (0.0001, "0.0001"),
            (123456789012.0, "123456789012"),
            (1234567890123.0, "1.23456789012e+12"),
            (9.99999999999951, "10"),
            (0.0, "0"),
            (f64::INFINITY, "inf"),
            (f64::NAN, "nan"),
            (200.0, "200"),
        ];
        for (v, want) in cases {
            assert_eq!(fmt_g(v), want, "{v}");
        }
    }

    #[test]
    fn sweep_csv_layout() {
        let mut buf = Vec::new();
        let pts = [BoundaryPoint { rho1: 0.05, alpha_star_closed: 1.5, alpha_star_spectral: 1.5 }];
        write_sweep_csv(&mut buf, &pts).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "rho1,alpha_star_closed,alpha_star_spectral\n0.05,1.5,1.5\n"
        );
    }
}
