//! CSV and SVG renderings of landscapes, loss reports and trajectories.
//!
//! Numbers are written with 9 significant digits in `%g` style. Header
//! cells carry their unit in brackets. Output is a pure function of the
//! input so repeated runs are byte-identical.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::landscape::LambdaLandscape;
use crate::losses::{LossReport, LOSS_CAP_DB};
use crate::toysep::{RunStatus, TrajectoryRecord};

/// `%.9g`-style formatting.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(sig9).unwrap_or_default()
}

pub fn landscape_csv(l: &LambdaLandscape) -> String {
    let mut out = String::from("lambda[dimensionless],analytic_pair_loss[dB],mc_mean[dB],mc_stderr[dB],scer[dB]");
    for c in &l.combined {
        let _ = write!(out, ",combined_alpha={}[dB]", sig9(c.alpha));
    }
    out.push('\n');
    for (i, &lambda) in l.grid.iter().enumerate() {
        let mc = l.mc_loss.as_ref().map(|m| m[i]);
        let _ = write!(
            out,
            "{},{},{},{},{}",
            sig9(lambda),
            sig9(l.analytic_loss[i]),
            opt(mc.map(|m| m.mean)),
            opt(mc.map(|m| m.std_error)),
            sig9(l.scer_curve[i]),
        );
        for c in &l.combined {
            let _ = write!(out, ",{}", sig9(c.values[i]));
        }
        out.push('\n');
    }
    out
}

pub fn loss_report_csv(r: &LossReport) -> String {
    let mut out = String::from(
        "source,mixture_prev,mixture_curr,sdr_prev[dB],sdr_curr[dB],scer[dB],beta_prev[dimensionless],beta_curr[dimensionless]\n",
    );
    for t in &r.per_source {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            t.source_index,
            t.mixtures[0],
            t.mixtures[1],
            sig9(t.sdr_db[0]),
            sig9(t.sdr_db[1]),
            sig9(t.scer_db),
            sig9(t.betas[0]),
            sig9(t.betas[1]),
        );
    }
    let _ = writeln!(out, "mean,,,{},,{},,", sig9(r.sdr_mean), sig9(r.scer_mean),);
    let _ = writeln!(out, "batch_loss(alpha={}),,,{},,,,", sig9(r.alpha), sig9(r.batch_loss));
    out
}

pub fn trajectory_csv(t: &TrajectoryRecord) -> String {
    let n_lambdas = t.steps.first().map(|s| s.lambdas.len()).unwrap_or(0);
    let mut out = String::from("step,loss[dB],grad_max_norm[dB],mean_lambda[dimensionless]");
    for i in 0..n_lambdas {
        let _ = write!(
            out,
            ",lambda_s{}_{}[dimensionless]",
            i / 2,
            if i % 2 == 0 { "prev" } else { "curr" }
        );
    }
    out.push('\n');
    for s in &t.steps {
        let mean = s.lambdas.iter().sum::<f64>() / s.lambdas.len() as f64;
        let _ = write!(
            out,
            "{},{},{},{}",
            s.step,
            sig9(s.loss),
            sig9(s.grad_max_norm),
            sig9(mean)
        );
        for &l in &s.lambdas {
            let _ = write!(out, ",{}", sig9(l));
        }
        out.push('\n');
    }
    out
}

/// One row of an α sweep summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub status: RunStatus,
    pub steps: usize,
    pub final_loss_db: f64,
    pub final_mean_lambda: f64,
    pub occupancy_n_self: f64,
    pub occupancy_n_other: f64,
    pub si_sdr_clean_db: f64,
    /// Argmin of the analytic combined curve for the batch's noise profile.
    pub analytic_argmin: f64,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "alpha[dimensionless],status,steps,final_loss[dB],final_mean_lambda[dimensionless],occupancy_n_self[dimensionless],occupancy_n_other[dimensionless],si_sdr_clean[dB],analytic_argmin[dimensionless]\n",
    );
    for r in rows {
        let status = match r.status {
            RunStatus::Converged => "converged",
            RunStatus::BudgetExhausted => "budget_exhausted",
            RunStatus::Diverged => "diverged",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            sig9(r.alpha),
            status,
            r.steps,
            sig9(r.final_loss_db),
            sig9(r.final_mean_lambda),
            sig9(r.occupancy_n_self),
            sig9(r.occupancy_n_other),
            sig9(r.si_sdr_clean_db),
            sig9(r.analytic_argmin),
        );
    }
    out
}

/// A named curve for [`line_plot_svg`].
pub struct Series<'a> {
    pub label: String,
    pub xs: &'a [f64],
    pub ys: &'a [f64],
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Minimal SVG line chart. Values at or below the loss floor are clipped to
/// the lowest uncapped value so capped endpoints do not flatten the plot.
pub fn line_plot_svg(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>]) -> String {
    let (w, h) = (640.0, 400.0);
    let (ml, mr, mt, mb) = (60.0, 160.0, 30.0, 45.0);
    let finite = |y: f64| y.is_finite() && y > -LOSS_CAP_DB + 1e-6;
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for (&x, &y) in s.xs.iter().zip(s.ys) {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            if finite(y) {
                y_min = y_min.min(y);
                y_max = y_max.max(y);
            }
        }
    }
    if !y_min.is_finite() {
        y_min = -1.0;
        y_max = 1.0;
    }
    if y_max - y_min < 1e-9 {
        y_min -= 1.0;
        y_max += 1.0;
    }
    if !(x_max > x_min) {
        x_min = 0.0;
        x_max = 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    let (y_lo, y_hi) = (y_min - pad, y_max + pad);
    let px = |x: f64| ml + (x - x_min) / (x_max - x_min) * (w - ml - mr);
    let py = |y: f64| {
        let y = if finite(y) { y.clamp(y_lo, y_hi) } else { y_lo };
        mt + (y_hi - y) / (y_hi - y_lo) * (h - mt - mb)
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="18" font-size="13">{}</text>"#,
        ml,
        escape(title)
    );
    let (x0, x1, y0, y1) = (ml, w - mr, mt, h - mb);
    let _ = writeln!(
        out,
        r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y1 - y0
    );
    for i in 0..=4 {
        let fx = x_min + (x_max - x_min) * i as f64 / 4.0;
        let fy = y_lo + (y_hi - y_lo) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            px(fx),
            y1 + 14.0,
            sig_short(fx)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            py(fy) + 4.0,
            sig_short(fy)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        h - 8.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let points: Vec<String> =
            s.xs.iter()
                .zip(s.ys)
                .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = mt + 14.0 * (i as f64 + 1.0);
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{colour}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            x1 + 10.0,
            x1 + 30.0,
            x1 + 35.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn sig_short(x: f64) -> String {
    let s = format!("{x:.3}");
    trim_zeros(s)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn landscape_svg(l: &LambdaLandscape) -> String {
    let mut series = vec![
        Series {
            label: "pair SDR".into(),
            xs: &l.grid,
            ys: &l.analytic_loss,
        },
        Series {
            label: "SCER".into(),
            xs: &l.grid,
            ys: &l.scer_curve,
        },
    ];
    for c in &l.combined {
        series.push(Series {
            label: format!("combined a={}", sig9(c.alpha)),
            xs: &l.grid,
            ys: &c.values,
        });
    }
    line_plot_svg(
        &format!("e1={} e2={}", sig9(l.profile.e1), sig9(l.profile.e2)),
        "lambda",
        "loss [dB]",
        &series,
    )
}

pub fn trajectory_svg(runs: &[TrajectoryRecord]) -> String {
    let data: Vec<(String, Vec<f64>, Vec<f64>)> = runs
        .iter()
        .map(|t| {
            let xs = t.steps.iter().map(|s| s.step as f64).collect();
            let ys = t
                .steps
                .iter()
                .map(|s| s.lambdas.iter().sum::<f64>() / s.lambdas.len() as f64)
                .collect();
            (format!("alpha={}", sig9(t.alpha)), xs, ys)
        })
        .collect();
    let series: Vec<Series<'_>> = data
        .iter()
        .map(|(label, xs, ys)| Series {
            label: label.clone(),
            xs,
            ys,
        })
        .collect();
    line_plot_svg("mean lambda per step", "step", "mean lambda", &series)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_formats() {
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(0.5), "0.5");
        assert_eq!(sig9(-6.020599913279624), "-6.02059991");
        assert_eq!(sig9(120.0), "120");
        assert_eq!(sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(sig9(1.5e-7), "1.5e-7");
        assert_eq!(sig9(123456789012.0), "1.23456789e11");
        assert_eq!(sig9(f64::NAN), "nan");
        assert_eq!(sig9(99999999.95), "100000000");
    }

    #[test]
    fn sig9_preserves_nine_digits() {
        for &x in &[1.234567891234, -0.000123456789123, 98765.4321987, 3.0103e-3] {
            let back: f64 = sig9(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 1e-8, "{x} -> {}", sig9(x));
        }
    }

    #[test]
    fn svg_has_no_timestamps_and_is_stable() {
        let xs = [0.0, 0.5, 1.0];
        let ys = [1.0, -LOSS_CAP_DB, 2.0];
        let s = || {
            line_plot_svg(
                "t",
                "x",
                "y",
                &[Series {
                    label: "a<b".into(),
                    xs: &xs,
                    ys: &ys,
                }],
            )
        };
        assert_eq!(s(), s());
        assert!(s().contains("a&lt;b"));
        assert!(s().starts_with("<svg"));
    }
}
