//! CSV rendering for reports and curves.
//!
//! All builders return complete file contents: comma separators, a header
//! row, LF line endings, '.' decimal point, reals at 17 significant digits.
//! JSON output is left to the caller via the `Serialize` impls on the report
//! types.

use serde::Serialize;

use crate::estimators::ReplicationSummary;
use crate::experiments::{ProposalCurves, RatioCurve};
use crate::proposals::Proposal;
use crate::variance_analytics::VarianceReport;

/// Formats with 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn push_row(out: &mut String, fields: &[String]) {
    out.push_str(&fields.join(","));
    out.push('\n');
}

/// One row per noise level, columns in the pinned order.
pub fn ratio_curve_csv(curve: &RatioCurve) -> String {
    let mut out = String::new();
    out.push_str(
        "A,v_opt_theory,v_subopt_theory,ratio_theory,v_opt_emp,v_subopt_emp,ratio_emp,stderr_ratio_emp\n",
    );
    for pt in &curve.points {
        push_row(
            &mut out,
            &[
                fmt_f64(pt.a_level),
                fmt_f64(pt.v_opt_theory),
                fmt_f64(pt.v_subopt_theory),
                fmt_f64(pt.ratio_theory),
                fmt_f64(pt.v_opt_emp),
                fmt_f64(pt.v_subopt_emp),
                fmt_f64(pt.ratio_emp),
                fmt_f64(pt.stderr_ratio_emp),
            ],
        );
    }
    out
}

/// Columns x, p, then one (q_opt_A, s_A) pair per noise level. The noise
/// level appears in the header in its shortest decimal form.
pub fn proposal_curves_csv(curves: &ProposalCurves) -> String {
    let mut out = String::from("x,p");
    for a in &curves.a_levels {
        out.push_str(&format!(",q_opt_{a},s_{a}"));
    }
    out.push('\n');
    for j in 0..curves.xs.len() {
        let mut fields = vec![fmt_f64(curves.xs[j]), fmt_f64(curves.p[j])];
        for k in 0..curves.a_levels.len() {
            fields.push(fmt_f64(curves.q_opt[k][j]));
            fields.push(fmt_f64(curves.s[k][j]));
        }
        push_row(&mut out, &fields);
    }
    out
}

/// Two-column export of a single proposal density on an even grid.
pub fn proposal_density_csv(proposal: &Proposal, points: usize) -> String {
    let (lo, hi) = proposal.support();
    let step = (hi - lo) / (points - 1) as f64;
    let mut out = String::from("x,density\n");
    for j in 0..points {
        let x = if j == points - 1 { hi } else { lo + j as f64 * step };
        push_row(&mut out, &[fmt_f64(x), fmt_f64(proposal.density(x))]);
    }
    out
}

/// A variance report keyed by the run that produced it.
#[derive(Clone, Debug, Serialize)]
pub struct VarianceTableRow {
    pub experiment: String,
    #[serde(rename = "A")]
    pub a_level: f64,
    #[serde(flatten)]
    pub report: VarianceReport,
}

pub fn variance_table_csv(rows: &[VarianceTableRow]) -> String {
    let mut out = String::from("experiment,A,N,v_q,v_min,v_sub_opt,ratio,z_bar\n");
    for row in rows {
        push_row(
            &mut out,
            &[
                row.experiment.clone(),
                fmt_f64(row.a_level),
                row.report.n.to_string(),
                fmt_f64(row.report.v_q),
                fmt_f64(row.report.v_min),
                fmt_f64(row.report.v_sub_opt),
                fmt_f64(row.report.ratio),
                fmt_f64(row.report.z_bar),
            ],
        );
    }
    out
}

/// One row per replication. Component columns appear only when the summary
/// carries the corresponding estimates.
pub fn replication_rows_csv(summary: &ReplicationSummary) -> String {
    let dim_std = summary
        .per_rep
        .first()
        .and_then(|r| r.i_std.as_ref())
        .map_or(0, Vec::len);
    let dim_self = summary
        .per_rep
        .first()
        .and_then(|r| r.i_self.as_ref())
        .map_or(0, Vec::len);
    let mut out = String::from("rep,seed,z_hat,ess_proxy");
    for p in 0..dim_std {
        out.push_str(&format!(",i_std_{p}"));
    }
    for p in 0..dim_self {
        out.push_str(&format!(",i_self_{p}"));
    }
    out.push('\n');
    for (i, rep) in summary.per_rep.iter().enumerate() {
        let mut fields = vec![
            i.to_string(),
            summary.base_seed.wrapping_add(i as u64).to_string(),
            fmt_f64(rep.z_hat),
            fmt_f64(rep.ess_proxy),
        ];
        if let Some(vals) = &rep.i_std {
            fields.extend(vals.iter().map(|&v| fmt_f64(v)));
        }
        if let Some(vals) = &rep.i_self {
            fields.extend(vals.iter().map(|&v| fmt_f64(v)));
        }
        push_row(&mut out, &fields);
    }
    out
}
