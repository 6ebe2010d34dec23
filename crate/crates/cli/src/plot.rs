//! Tidy CSV tables for the standard figures.

use std::io::{self, Write};

use replab_core::geometry::flow;
use replab_core::resolvent::{HolderReport, SweepRecord};
use replab_core::radiation::RadiationSweepRow;
use replab_core::Trajectory;

/// One labelled dyadic tail; entry `ν` belongs to `R_ν = 2^ν`.
#[derive(Debug, Clone)]
pub struct TailSeries {
    pub label: String,
    pub tail: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub enum PlotData<'a> {
    /// `bound_ratio` against `Γ`, one series per ψ.
    BoundRatio(&'a [SweepRecord]),
    /// Out and in residual ratios against `Γ`, one series per β.
    Residual(&'a [RadiationSweepRow]),
    /// Tail value against `ν`.
    Tail(&'a [TailSeries]),
    /// Hölder fit points followed by `omega`, `omega_gradient`, `floor` and
    /// `s` metadata rows.
    Holder(Option<&'a HolderReport>),
    /// `|y|/t` and `f/t` along an orbit.
    Orbit(Option<&'a Trajectory>),
}

impl PlotData<'_> {
    pub fn header(&self) -> &'static str {
        match self {
            PlotData::BoundRatio(_) => "psi_id,gamma,bound_ratio,norm_phi_Bstar,norm_psi_B",
            PlotData::Residual(_) => "beta,gamma,out_ratio,in_ratio",
            PlotData::Tail(_) => "series,nu,R_nu,tail_value",
            PlotData::Holder(_) => "row,distance,norm,gradient_norm,value",
            PlotData::Orbit(_) => "t,y_over_t,f_over_t",
        }
    }
}

pub fn emit_plot_data<W: Write>(data: &PlotData, mut w: W) -> io::Result<()> {
    writeln!(w, "{}", data.header())?;
    match *data {
        PlotData::BoundRatio(records) => {
            let mut rows: Vec<&SweepRecord> = records.iter().collect();
            rows.sort_by(|a, b| a.psi_id.cmp(&b.psi_id).then(a.query.gamma.total_cmp(&b.query.gamma)));
            for r in rows {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    r.psi_id, r.query.gamma, r.bound_ratio, r.norm_phi_bstar, r.norm_psi_b
                )?;
            }
        }
        PlotData::Residual(rows) => {
            let mut flat: Vec<(f64, f64, f64, f64)> = rows
                .iter()
                .flat_map(|row| row.reports.iter().map(move |r| (r.beta, row.gamma, r.out_ratio(), r.in_ratio())))
                .collect();
            flat.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            for (beta, gamma, out, inn) in flat {
                writeln!(w, "{beta},{gamma},{out},{inn}")?;
            }
        }
        PlotData::Tail(series) => {
            for s in series {
                for (nu, v) in s.tail.iter().enumerate() {
                    writeln!(w, "{},{nu},{},{v}", s.label, 2f64.powi(nu as i32))?;
                }
            }
        }
        PlotData::Holder(Some(rep)) => {
            let mut samples: Vec<_> = rep.samples.iter().collect();
            samples.sort_by(|a, b| a.distance.total_cmp(&b.distance));
            for s in samples {
                writeln!(w, "point,{},{},{},", s.distance, s.norm, s.gradient_norm)?;
            }
            for (name, v) in [
                ("omega", rep.omega),
                ("omega_gradient", rep.omega_gradient),
                ("floor", rep.floor),
                ("s", rep.s),
            ] {
                writeln!(w, "{name},,,,{v}")?;
            }
        }
        PlotData::Orbit(Some(tr)) => {
            for (t, x) in tr.times.iter().zip(&tr.positions) {
                if *t <= 0.0 {
                    continue;
                }
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let y = replab_core::classical::y_magnitude(r, tr.epsilon);
                writeln!(w, "{t},{},{}", y / t, flow(r.max(1.0), tr.epsilon) / t)?;
            }
        }
        PlotData::Holder(None) | PlotData::Orbit(None) => {}
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text(data: PlotData) -> String {
        let mut buf = Vec::new();
        emit_plot_data(&data, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn empty_sets_give_header_only() {
        for d in [
            PlotData::BoundRatio(&[]),
            PlotData::Residual(&[]),
            PlotData::Tail(&[]),
            PlotData::Holder(None),
            PlotData::Orbit(None),
        ] {
            assert_eq!(text(d), format!("{}\n", d.header()));
        }
    }

    #[test]
    fn tail_rows_carry_dyadic_radii() {
        let s = [TailSeries {
            label: "phi".into(),
            tail: vec![1.0, 0.5, 0.25],
        }];
        let t = text(PlotData::Tail(&s));
        assert_eq!(t.lines().nth(3), Some("phi,2,4,0.25"));
    }
}
