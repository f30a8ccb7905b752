//! CSV rendering with fixed 6-significant-digit numeric formatting, so a
//! rerun with the same seed produces byte-identical output.

use crate::experiments::{GilbertRow, MemorylessRow, OptDistortionRow, OracleValidation};
use csgq::rd_optimizer::TradeoffPoint;

/// Six significant digits in scientific notation (one integer digit plus
/// five fractional).
pub fn fmt_sig6(x: f64) -> String {
    format!("{x:.5e}")
}

pub fn tradeoff_csv(rows: &[TradeoffPoint]) -> String {
    let mut out = String::from("b,B,D_s_mean,D_s_stderr,D_c_mean,D_c_stderr\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.point.coarse_bits,
            row.point.fine_bits,
            fmt_sig6(row.point.side_distortion),
            fmt_sig6(row.side_stderr),
            fmt_sig6(row.point.central_distortion),
            fmt_sig6(row.central_stderr),
        ));
    }
    out
}

pub fn opt_distortion_csv(rows: &[OptDistortionRow]) -> String {
    let mut out = String::from("p,b_oracle,D_avg_oracle,b_operational,D_avg_operational\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_sig6(row.p),
            row.b_oracle,
            fmt_sig6(row.d_avg_oracle),
            row.b_operational,
            fmt_sig6(row.d_avg_operational),
        ));
    }
    out
}

pub fn memoryless_csv(rows: &[MemorylessRow]) -> String {
    let mut out = String::from("p,D_csgq,D_segmentation\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_sig6(row.p),
            fmt_sig6(row.d_csgq),
            fmt_sig6(row.d_segmentation),
        ));
    }
    out
}

pub fn gilbert_csv(rows: &[GilbertRow]) -> String {
    let mut out = String::from("p,q,D_segmentation,D_csgq\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_sig6(row.good_to_bad),
            fmt_sig6(row.bad_to_good),
            fmt_sig6(row.d_segmentation),
            fmt_sig6(row.d_csgq),
        ));
    }
    out
}

pub fn oracle_validate_csv(report: &OracleValidation) -> String {
    let mut out = String::from("quantity,formula,monte_carlo,relative_gap\n");
    out.push_str(&format!(
        "side,{},{},{}\n",
        fmt_sig6(report.side_formula),
        fmt_sig6(report.side_monte_carlo),
        fmt_sig6(report.side_gap),
    ));
    out.push_str(&format!(
        "central,{},{},{}\n",
        fmt_sig6(report.central_formula),
        fmt_sig6(report.central_monte_carlo),
        fmt_sig6(report.central_gap),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_sig6(0.028781715883), "2.87817e-2");
        assert_eq!(fmt_sig6(0.0), "0.00000e0");
        assert_eq!(fmt_sig6(1.0), "1.00000e0");
        assert_eq!(fmt_sig6(-12345.678), "-1.23457e4");
    }
}
