use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use super::{DiagnosticsError, PowerBalanceSeries};
use crate::dae::Vector;
use crate::fem::{vtk::write_vtk, DofMap, Mesh2D};
use crate::mqs::MqsTrajectory;

/// Columns `t,i_1..i_m,flux_1..flux_m,energy,balance_residual`; the current
/// and balance fields of the initial row are empty.
pub fn write_timeseries_csv(traj: &MqsTrajectory, path: &Path) -> Result<(), DiagnosticsError> {
    let m = traj.m();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=m).map(|j| format!("i_{j}")));
    header.extend((1..=m).map(|j| format!("flux_{j}")));
    header.push("energy".into());
    header.push("balance_residual".into());
    w.write_record(&header)?;
    for k in 0..=traj.n_steps() {
        let mut row = vec![traj.times[k].to_string()];
        match &traj.currents[k] {
            Some(i) => row.extend(i.iter().map(|v| v.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), m)),
        }
        row.extend(traj.fluxes[k].iter().map(|v| v.to_string()));
        row.push(traj.energies[k].to_string());
        row.push(traj.balance[k].map(|d| d.to_string()).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `t,delta,cumulative`.
pub fn write_power_balance_csv(series: &PowerBalanceSeries, path: &Path) -> Result<(), DiagnosticsError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "delta", "cumulative"])?;
    for k in 0..series.delta.len() {
        w.write_record([series.times[k].to_string(), series.delta[k].to_string(), series.cumulative[k].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_field_vtk(mesh: &Mesh2D, dofs: &DofMap, a: &Vector, path: &Path) -> Result<(), DiagnosticsError> {
    let mut f = BufWriter::new(File::create(path)?);
    write_vtk(&mut f, mesh, Some(&dofs.to_vertex_values(a)))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mqs::{solve, MqsConfig, VoltageSignal};
    use nalgebra::DVector;

    #[test]
    fn initial_only_trajectory_has_empty_current_fields() {
        let cfg = MqsConfig { n: 8, t_end: 0.5, tau: 0.5, ..MqsConfig::default() };
        let (_, mut traj) = solve(&cfg).unwrap();
        traj.fields.truncate(1);
        traj.times.truncate(1);
        traj.currents.truncate(1);
        traj.fluxes.truncate(1);
        traj.energies.truncate(1);
        traj.balance.truncate(1);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ts.csv");
        write_timeseries_csv(&traj, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, "t,i_1,flux_1,energy,balance_residual\n0,,0,0,\n");
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let cfg = MqsConfig { n: 8, t_end: 0.25, voltage: VoltageSignal::Constant(DVector::from_element(1, 0.7)), ..MqsConfig::default() };
        let (_, traj) = solve(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ts.csv");
        write_timeseries_csv(&traj, &p).unwrap();
        let mut rdr = csv::Reader::from_path(&p).unwrap();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec.unwrap();
            assert_eq!(rec[0].parse::<f64>().unwrap().to_bits(), traj.times[k].to_bits());
            if k > 0 {
                assert_eq!(rec[1].parse::<f64>().unwrap().to_bits(), traj.current(k)[0].to_bits());
                assert_eq!(rec[4].parse::<f64>().unwrap().to_bits(), traj.balance[k].unwrap().to_bits());
            }
            assert_eq!(rec[2].parse::<f64>().unwrap().to_bits(), traj.fluxes[k][0].to_bits());
            assert_eq!(rec[3].parse::<f64>().unwrap().to_bits(), traj.energies[k].to_bits());
        }
    }

    #[test]
    fn zero_field_vtk() {
        let (mesh, dofs) = crate::fem::build_mesh(4, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.vtk");
        write_field_vtk(&mesh, &dofs, &DVector::zeros(dofs.n_dofs()), &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let tail = text.split("LOOKUP_TABLE default\n").last().unwrap();
        assert_eq!(tail.lines().count(), 25);
        assert!(tail.lines().all(|l| l.parse::<f64>().unwrap() == 0.0));
    }
}
