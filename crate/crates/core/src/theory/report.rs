//! Scaling-curve reports: per-grid-point means, power-law fits, and CSV,
//! JSON and gnuplot output.

use std::io::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub x: f64,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

/// `log(mean) = intercept + exponent * log(x)` by least squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub exponent: f64,
    /// `None` with only two points.
    pub stderr: Option<f64>,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSeries {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<ScalingPoint>,
    /// Absent when fewer than two points have positive means.
    pub fit: Option<PowerFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub experiment: String,
    pub params: serde_json::Value,
    pub series: Vec<ScalingSeries>,
}

impl ScalingReport {
    pub fn series(&self, name: &str) -> Option<&ScalingSeries> {
        self.series.iter().find(|s| s.name == name)
    }

    /// One row per grid point: `series,x,mean,stderr,n`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "series,x,mean,stderr,n")?;
        for s in &self.series {
            for p in &s.points {
                writeln!(
                    w,
                    "{},{},{:.10e},{:.10e},{}",
                    s.name, p.x, p.mean, p.stderr, p.n
                )?;
            }
        }
        w.flush()
    }

    pub fn write_json<W: Write>(&self, w: W) -> serde_json::Result<()> {
        serde_json::to_writer_pretty(w, self)
    }

    /// A gnuplot script drawing every series on log-log axes from the CSV
    /// written by [`ScalingReport::write_csv`].
    pub fn gnuplot_script(&self, csv_file: &str) -> String {
        let mut out = String::new();
        out.push_str("set datafile separator ','\nset logscale xy\nset key top left\n");
        out.push_str(&format!("set title '{}'\n", self.experiment));
        for (idx, s) in self.series.iter().enumerate() {
            out.push_str(&format!(
                "set term pngcairo size 800,600\nset output '{}.png'\nset xlabel '{}'\nset ylabel '{}'\n",
                s.name, s.x_label, s.y_label
            ));
            let fit = match s.fit {
                Some(f) => format!(
                    ", exp({}) * x**({}) title 'slope {:.3}' with lines",
                    f.intercept, f.exponent, f.exponent
                ),
                None => String::new(),
            };
            out.push_str(&format!(
                "plot '{csv_file}' skip 1 using 2:(strcol(1) eq '{}' ? $3 : 1/0):4 title '{}' with yerrorlines{fit}\n",
                s.name, s.name
            ));
            if idx + 1 < self.series.len() {
                out.push('\n');
            }
        }
        out
    }
}

/// Sample mean and standard error of the mean (0 for a single sample).
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Ordinary least squares of `log(mean)` on `log(x)` over the points with
/// positive `x` and `mean`.
pub fn power_fit(points: &[ScalingPoint]) -> Option<PowerFit> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.x > 0.0 && p.mean > 0.0)
        .map(|p| (p.x.ln(), p.mean.ln()))
        .collect();
    let n = logs.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let stderr = (n > 2).then(|| {
        let rss: f64 = logs
            .iter()
            .map(|p| (p.1 - intercept - exponent * p.0).powi(2))
            .sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    });
    Some(PowerFit {
        exponent,
        stderr,
        intercept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, mean: f64) -> ScalingPoint {
        ScalingPoint {
            x,
            mean,
            stderr: 0.0,
            n: 1,
        }
    }

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = [1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&x| pt(x, 3.0 * f64::powf(x, -0.5)))
            .collect();
        let fit = power_fit(&pts).unwrap();
        assert!((fit.exponent + 0.5).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(fit.stderr.unwrap() < 1e-12);
    }

    #[test]
    fn two_points_have_no_stderr_and_zeros_are_dropped() {
        let fit = power_fit(&[pt(1.0, 1.0), pt(10.0, 10.0), pt(100.0, 0.0)]).unwrap();
        assert!((fit.exponent - 1.0).abs() < 1e-12);
        assert!(fit.stderr.is_none());
        assert!(power_fit(&[pt(1.0, 0.0), pt(2.0, 0.0)]).is_none());
    }

    #[test]
    fn stderr_matches_textbook_formula() {
        let pts = [pt(1.0, 1.0), pt(2.0, 3.0), pt(4.0, 2.0), pt(8.0, 7.0)];
        let fit = power_fit(&pts).unwrap();
        let xs: Vec<f64> = pts.iter().map(|p| p.x.ln()).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.mean.ln()).collect();
        let mx = xs.iter().sum::<f64>() / 4.0;
        let resid: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - fit.intercept - fit.exponent * x).powi(2))
            .sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        assert!((fit.stderr.unwrap() - (resid / 2.0 / sxx).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn mean_and_stderr_small_samples() {
        assert_eq!(mean_and_stderr(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_and_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn outputs_mention_every_series() {
        let report = ScalingReport {
            experiment: "demo".into(),
            params: serde_json::json!({"d": 3}),
            series: vec![ScalingSeries {
                name: "a".into(),
                x_label: "x".into(),
                y_label: "y".into(),
                points: vec![pt(1.0, 2.0)],
                fit: None,
            }],
        };
        let mut csv = Vec::new();
        report.write_csv(&mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().starts_with("a,1,"));
        let mut json = Vec::new();
        report.write_json(&mut json).unwrap();
        let back: ScalingReport = serde_json::from_slice(&json).unwrap();
        assert_eq!(back, report);
        assert!(report.gnuplot_script("r.csv").contains("'r.csv'"));
    }
}
