use std::fmt::Write;

use super::EvalReport;

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned text table, one line per T2 range, then PD, then comparisons.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{:<18} {:>10} {:>14}", "quantity", "pixels", "mean err (%)").unwrap();
        for r in &self.t2_ranges {
            let label = format!("T2 [{}, {})", r.lo, r.hi);
            writeln!(out, "{:<18} {:>10} {:>14}", label, r.count, pct(r.mean_error_pct)).unwrap();
        }
        writeln!(out, "{:<18} {:>10} {:>14}", "PD", self.pd.count, pct(self.pd.mean_error_pct)).unwrap();
        if !self.comparisons.is_empty() {
            writeln!(out).unwrap();
            writeln!(
                out,
                "{:<18} {:>6} {:>12} {:>12} {:>10} {:>12} {:>5}",
                "comparison", "cases", "mean A (%)", "mean B (%)", "t", "p", "sig"
            )
            .unwrap();
            for c in &self.comparisons {
                writeln!(
                    out,
                    "{:<18} {:>6} {:>12.4} {:>12.4} {:>10.4} {:>12.4e} {:>5}",
                    c.quantity,
                    c.n_cases,
                    c.mean_a,
                    c.mean_b,
                    c.t_statistic,
                    c.p_value,
                    if c.significant { "yes" } else { "no" }
                )
                .unwrap();
            }
        }
        out
    }

    /// `quantity,lo,hi,count,mean_error_pct` rows for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("quantity,lo,hi,count,mean_error_pct\n");
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        for r in &self.t2_ranges {
            writeln!(out, "t2,{},{},{},{}", r.lo, r.hi, r.count, opt(r.mean_error_pct)).unwrap();
        }
        writeln!(out, "pd,,,{},{}", self.pd.count, opt(self.pd.mean_error_pct)).unwrap();
        out
    }
}
