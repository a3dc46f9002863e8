//! CSV files and the plain-text report table.

use std::io::Write;

use admittance_core::harness::{RunReport, SuiteRow};
use admittance_core::stability::SweepRow;
use admittance_core::TraceRecord;

pub const TRACE_HEADER: [&str; 20] = [
    "t",
    "px",
    "py",
    "pz",
    "pax",
    "pay",
    "paz",
    "p0x",
    "p0y",
    "p0z",
    "vcx",
    "vcy",
    "vcz",
    "fx",
    "fy",
    "fz",
    "fexcz",
    "mu_hat",
    "mu_applied",
    "wp_index",
];

pub const SUITE_HEADER: [&str; 10] = [
    "exp_id",
    "k",
    "compensation",
    "completed",
    "sag_sim_mm",
    "sag_eq6_mm",
    "rmse_mm",
    "estimate_mean_g",
    "status",
    "note",
];

pub const STABILITY_HEADER: [&str; 9] = [
    "k_a",
    "tau_v",
    "t_f",
    "m_u_hat_gain",
    "b_a",
    "max_real_part",
    "stable",
    "degenerate",
    "method_agreement",
];

fn num(x: f64) -> String {
    x.to_string()
}

pub fn write_trace<W: Write>(w: W, trace: &[TraceRecord]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_HEADER)?;
    for r in trace {
        let mut row: Vec<String> = [
            r.t,
            r.p_true.x,
            r.p_true.y,
            r.p_true.z,
            r.p_a.x,
            r.p_a.y,
            r.p_a.z,
            r.p_0.x,
            r.p_0.y,
            r.p_0.z,
            r.v_cmd.x,
            r.v_cmd.y,
            r.v_cmd.z,
            r.f_ext_filtered.x,
            r.f_ext_filtered.y,
            r.f_ext_filtered.z,
            r.f_exc.z,
            r.m_u_hat,
            r.m_u_applied,
        ]
        .iter()
        .map(|&x| num(x))
        .collect();
        row.push(r.mission_index.to_string());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

fn state_name(r: &RunReport) -> &'static str {
    use admittance_core::MissionState::*;
    match r.state {
        Moving => "incomplete",
        Completed => "completed",
        FailedTimeout => "failed_timeout",
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// One header row and one value row; arrival times get one column per waypoint.
pub fn write_report<W: Write>(w: W, r: &RunReport, dt: f64) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = [
        "completed",
        "state",
        "sag_mm",
        "rmse_mm",
        "estimate_mean_g",
        "estimate_std_g",
        "grasp_time_s",
        "final_index",
        "duration_s",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..r.arrival_times.len()).map(|i| format!("arrival_wp{i}_s")));
    out.write_record(&header)?;
    let mut row = vec![
        r.completed.to_string(),
        state_name(r).to_string(),
        num(r.sag_mm),
        num(r.rmse_mm),
        num(r.estimate_mean_g),
        num(r.estimate_std_g),
        opt(r.grasp_tick.map(|t| t as f64 * dt)),
        r.final_index.to_string(),
        num(r.duration),
    ];
    row.extend(r.arrival_times.iter().map(|&a| opt(a)));
    out.write_record(&row)?;
    out.flush()?;
    Ok(())
}

pub fn report_table(r: &RunReport) -> String {
    let mut s = String::new();
    let line = |s: &mut String, k: &str, v: String| s.push_str(&format!("{k:<18} {v}\n"));
    line(&mut s, "outcome", state_name(r).to_string());
    line(&mut s, "sag", format!("{:.3} mm", r.sag_mm));
    line(&mut s, "rmse", format!("{:.3} mm", r.rmse_mm));
    line(
        &mut s,
        "mass estimate",
        format!("{:.1} g (std {:.1} g)", r.estimate_mean_g, r.estimate_std_g),
    );
    line(&mut s, "duration", format!("{:.3} s", r.duration));
    for (i, a) in r.arrival_times.iter().enumerate() {
        line(
            &mut s,
            &format!("waypoint {i}"),
            a.map_or_else(|| "not reached".to_string(), |t| format!("{t:.3} s")),
        );
    }
    s
}

pub fn write_suite<W: Write>(w: W, rows: &[SuiteRow]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SUITE_HEADER)?;
    for r in rows {
        let (completed, sag, rmse, est) = match &r.report {
            Some(rep) => (
                rep.completed.to_string(),
                num(rep.sag_mm),
                num(rep.rmse_mm),
                num(rep.estimate_mean_g),
            ),
            None => Default::default(),
        };
        out.write_record([
            r.exp_id.to_string(),
            num(r.k),
            r.compensation.to_string(),
            completed,
            sag,
            num(r.sag_eq6_mm),
            rmse,
            est,
            r.status.as_str().to_string(),
            r.note.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn suite_table(rows: &[SuiteRow]) -> String {
    let mut s = format!(
        "{:<4} {:>7} {:>5} {:>10} {:>10} {:>10} {:>9} {:>10}  {}\n",
        "exp", "k", "comp", "outcome", "sag mm", "m·g/k mm", "rmse mm", "est g", "status"
    );
    for r in rows {
        let (outcome, sag, rmse, est) = match &r.report {
            Some(rep) => (
                if rep.completed { "success" } else { "fail" }.to_string(),
                format!("{:.3}", rep.sag_mm),
                format!("{:.3}", rep.rmse_mm),
                format!("{:.1}", rep.estimate_mean_g),
            ),
            None => ("-".into(), "-".into(), "-".into(), "-".into()),
        };
        s.push_str(&format!(
            "{:<4} {:>7} {:>5} {:>10} {:>10} {:>10.3} {:>9} {:>10}  {}\n",
            r.exp_id,
            r.k,
            if r.compensation { "yes" } else { "no" },
            outcome,
            sag,
            r.sag_eq6_mm,
            rmse,
            est,
            r.status.as_str()
        ));
        if !r.note.is_empty() {
            s.push_str(&format!("       {}\n", r.note));
        }
    }
    s
}

pub fn write_stability<W: Write>(w: W, rows: &[SweepRow]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(STABILITY_HEADER)?;
    for r in rows {
        out.write_record([
            num(r.k_a),
            num(r.tau_v),
            num(r.t_f),
            num(r.m_u_hat_gain),
            num(r.b_a),
            num(r.max_real_part),
            r.stable.to_string(),
            r.degenerate.to_string(),
            r.method_agreement.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
