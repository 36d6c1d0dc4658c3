//! The seven named experiments. Each turns a resolved config into a
//! long-format table, a JSON summary, the warnings met along the way and
//! optional SVG plots.

use geophase::closed_form::{
    self, db_to_r, dispersive_quantities, freq_switch_quantities, freq_switch_relative_sensitivity,
    geometric_phase_total, qfi_geometric, r_to_db, relative_sensitivity_geometric_at, DispersiveParams, SensingParams,
};
use geophase::metrology::{
    free_evolution_family, geometric_loop_family, noise_qfi_sweep, FisherMethod, NoiseSweepSpec, Stencil,
};
use geophase::phase_space::{protocol_snapshots, Snapshot};
use geophase::protocol::{
    build_dispersive_loop, build_dispersive_loop_rotated, build_free_evolution, build_freq_switch_loop,
    build_freq_switch_loop_quenched, build_geometric_loop, build_geometric_loop_pulsed, run_interference,
};
use geophase::states::{joint_plus_state, make_state};
use geophase::{Checked, HilbertParams, NoiseChannel, OscillatorState, QubitState, Result, Spin, Warning, WignerSpec};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{Config, ExperimentConfig, ExperimentKind, NoiseConfig, SweepRange};
use crate::svg::{self, Panel, Series};
use crate::table::{number, Table};

/// Loop closure error above which a loop result is flagged as truncated.
pub const CLOSURE_TOL: f64 = 1e-8;

fn closure_warnings(context: &str, closure_error: f64, base: &[Warning]) -> Vec<Warning> {
    let mut w = base.to_vec();
    if closure_error > CLOSURE_TOL {
        w.push(Warning::Truncation { context: format!("{context} loop closure"), deficit: closure_error });
    }
    w
}

/// Everything an experiment produces.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub table: Table,
    pub summary: Map<String, Value>,
    pub warnings: Vec<Warning>,
    /// `(file suffix, svg text)`
    pub plots: Vec<(String, String)>,
}

impl RunOutput {
    fn note(&mut self, key: &str, v: impl Into<Value>) {
        self.summary.insert(key.to_string(), v.into());
    }

    fn absorb(&mut self, w: &[Warning]) {
        for x in w {
            if !self.warnings.contains(x) {
                self.warnings.push(x.clone());
            }
        }
    }
}

/// Runs a resolved config.
pub fn run(cfg: &Config) -> Result<RunOutput> {
    match cfg {
        Config::Sensing(c) => match c.experiment {
            ExperimentKind::FreeEvolution => free_evolution(c),
            ExperimentKind::Geometric => geometric(c),
            ExperimentKind::FreqSwitch => freq_switch(c),
            ExperimentKind::NoiseSweep => noise_sweep(c),
            ExperimentKind::WignerSnapshots => wigner_snapshots(c),
            ExperimentKind::SensitivityCurve => Ok(sensitivity_curve(c.sweep.expect("resolved"))),
            ExperimentKind::Dispersive => unreachable!("dispersive configs carry dispersive params"),
        },
        Config::Dispersive(c) => dispersive(c),
    }
}

fn hilbert<P>(c: &ExperimentConfig<P>) -> Result<HilbertParams> {
    HilbertParams::new(c.cutoff.expect("resolved"))
}

fn initial_state<P>(c: &ExperimentConfig<P>, h: HilbertParams, out: &mut RunOutput) -> Result<OscillatorState> {
    let s = make_state(c.state.as_ref().expect("resolved"), h)?;
    out.absorb(&s.warnings);
    Ok(s.value)
}

fn curve(t: &Table, series: &str, y: &str, name: &str) -> Series {
    Series { name: name.to_string(), points: t.curve(series, y) }
}

fn free_evolution(c: &ExperimentConfig<SensingParams>) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    let p = c.params.expect("resolved");
    let h = hilbert(c)?;
    let step = c.fd_step.expect("resolved");
    let osc = initial_state(c, h, &mut out)?;
    let times = c.sweep.expect("resolved").values();
    let cells: Vec<Result<(Table, Vec<Warning>)>> = times
        .par_iter()
        .map(|&t| {
            let mut tab = Table::default();
            let mut all = Vec::new();
            let plan = build_free_evolution(&p, t, h)?;
            let (i, w) = run_interference(&plan, &osc, 1)?.into_parts();
            tab.push("numeric", "t", t, "sigma_x", i.sigma_x, &w);
            tab.push("numeric", "t", t, "sigma_y", i.sigma_y, &w);
            all.extend(w);
            let fam = free_evolution_family(p, t, h, osc.clone());
            let (st, mut w) = Stencil::sample(&fam, p.eta, step)?.into_parts();
            let qfi = st.estimate(FisherMethod::BlochQfi).collect_into(&mut w);
            let cfi = st.estimate(FisherMethod::BinaryCfi).collect_into(&mut w);
            tab.push("numeric", "t", t, "qfi", qfi.value, &w);
            tab.push("numeric", "t", t, "cfi", cfi.value, &w);
            all.extend(w);
            tab.push("closed_form", "t", t, "sigma_x", closed_form::sigma_x_free(&p, t), &[]);
            tab.push("closed_form", "t", t, "qfi", closed_form::qfi_free(&p, t), &[]);
            let cf = closed_form::cfi_free(&p, t);
            tab.push("closed_form", "t", t, "cfi", cf.value, &cf.warnings);
            all.extend(cf.warnings);
            Ok((tab, all))
        })
        .collect();
    for cell in cells {
        let (tab, w) = cell?;
        out.table.extend(tab);
        out.absorb(&w);
    }
    let tau = p.period();
    out.note("period", tau);
    out.note("qfi_sql_closed_form", closed_form::qfi_sql(&p));
    let num = out.table.curve("numeric", "qfi");
    if let Some(&(t, q)) = num.iter().min_by(|a, b| (a.0 - tau).abs().total_cmp(&(b.0 - tau).abs())) {
        out.note("qfi_numeric_nearest_period", q);
        out.note("nearest_period_time", t);
    }
    let t = &out.table;
    out.plots.push((
        "sigma_x".into(),
        svg::line_plot(
            "free evolution signal",
            "t",
            "<sigma_x>",
            &[curve(t, "numeric", "sigma_x", "numeric"), curve(t, "closed_form", "sigma_x", "closed form")],
            None,
        ),
    ));
    out.plots.push((
        "fisher".into(),
        svg::line_plot(
            "free evolution Fisher information",
            "t",
            "F",
            &[
                curve(t, "numeric", "qfi", "QFI numeric"),
                curve(t, "closed_form", "qfi", "QFI closed form"),
                curve(t, "numeric", "cfi", "CFI numeric"),
                curve(t, "closed_form", "cfi", "CFI closed form"),
            ],
            None,
        ),
    ));
    Ok(out)
}

fn geometric(c: &ExperimentConfig<SensingParams>) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    let p = c.params.expect("resolved");
    let h = hilbert(c)?;
    let step = c.fd_step.expect("resolved");
    let osc = initial_state(c, h, &mut out)?;
    let n = p.n_loops;
    let x = n as f64;

    let plan = build_geometric_loop(&p, h)?;
    out.absorb(plan.warnings());
    let lr = plan.loop_result(n);
    let pulsed = build_geometric_loop_pulsed(&p, h)?;
    out.absorb(pulsed.warnings());
    let pr = pulsed.loop_result(n);
    let (i, w) = run_interference(&plan, &osc, n)?.into_parts();
    out.absorb(&w);
    let phase_readout = -i.qubit.coherence().arg();

    let fam = geometric_loop_family(p, h, osc);
    let (st, mut fw) = Stencil::sample(&fam, p.eta, step)?.into_parts();
    let qfi = st.estimate(FisherMethod::BlochQfi).collect_into(&mut fw);
    let sld = st.estimate(FisherMethod::SldEigenQfi).collect_into(&mut fw);
    out.absorb(&fw);

    let phase_cf = n as f64 * geometric_phase_total(&p, Spin::Up);
    let qfi_cf = qfi_geometric(&p);
    let pw = closure_warnings("geometric", lr.closure_error, plan.warnings());
    let ppw = closure_warnings("pulsed geometric", pr.closure_error, pulsed.warnings());
    out.absorb(&pw);
    out.absorb(&ppw);
    let t = &mut out.table;
    t.push("numeric", "n_loops", x, "phase", lr.relative_phase, &pw);
    t.push("numeric", "n_loops", x, "closure_error", lr.closure_error, &pw);
    t.push("pulsed", "n_loops", x, "phase", pr.relative_phase, &ppw);
    t.push("pulsed", "n_loops", x, "closure_error", pr.closure_error, &ppw);
    t.push("readout", "n_loops", x, "phase", phase_readout, &w);
    t.push("readout", "n_loops", x, "sigma_x", i.sigma_x, &w);
    t.push("readout", "n_loops", x, "sigma_y", i.sigma_y, &w);
    t.push("numeric", "n_loops", x, "qfi", qfi.value, &fw);
    t.push("numeric", "n_loops", x, "qfi_sld", sld.value, &fw);
    t.push("closed_form", "n_loops", x, "phase", phase_cf, &[]);
    t.push("closed_form", "n_loops", x, "qfi", qfi_cf, &[]);

    out.note("phase_closed_form", phase_cf);
    out.note("phase_numeric", lr.relative_phase);
    out.note("phase_pulsed", pr.relative_phase);
    out.note("phase_readout", phase_readout);
    out.note("closure_error", lr.closure_error);
    out.note("qfi_closed_form", qfi_cf);
    out.note("qfi_numeric", qfi.value);
    out.note("qfi_relative_error", (qfi.value - qfi_cf).abs() / qfi_cf);
    Ok(out)
}

/// Maximum of a unimodal function on `[a, b]` by golden-section search.
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    for _ in 0..200 {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
        if (b - a).abs() < 1e-12 {
            break;
        }
    }
    let x = (a + b) / 2.0;
    (x, f(x))
}

fn freq_switch(c: &ExperimentConfig<SensingParams>) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    let p = c.params.expect("resolved");
    let h = hilbert(c)?;
    let osc = initial_state(c, h, &mut out)?;
    let sweep = c.sweep.expect("resolved");
    for r in sweep.values() {
        out.table.push("closed_form", "r", r, "relative_sensitivity", freq_switch_relative_sensitivity(r), &[]);
    }
    let q = freq_switch_quantities(&p)?;
    let quenched = build_freq_switch_loop_quenched(&p, h)?;
    let merged = build_freq_switch_loop(&p, h)?;
    out.absorb(quenched.warnings());
    out.absorb(merged.warnings());
    let lq = quenched.loop_result(1);
    let lm = merged.loop_result(1);
    let (i, w) = run_interference(&quenched, &osc, 1)?.into_parts();
    out.absorb(&w);
    let qw = closure_warnings("quenched", lq.closure_error, quenched.warnings());
    let mw = closure_warnings("merged", lm.closure_error, merged.warnings());
    out.absorb(&qw);
    out.absorb(&mw);
    let t = &mut out.table;
    t.push("quenched", "r", q.r, "phase", lq.relative_phase, &qw);
    t.push("quenched", "r", q.r, "closure_error", lq.closure_error, &qw);
    t.push("merged", "r", q.r, "phase", lm.relative_phase, &mw);
    t.push("readout", "r", q.r, "phase", -i.qubit.coherence().arg(), &w);
    t.push("closed_form", "r", q.r, "phase", q.phase, &[]);

    let (r_peak, peak) = golden_max(freq_switch_relative_sensitivity, 0.0, 3.0);
    out.note("r", q.r);
    out.note("omega_prime", p.omega_prime.unwrap_or(f64::NAN));
    out.note("phase_closed_form", q.phase);
    out.note("phase_quenched", lq.relative_phase);
    out.note("phase_merged", lm.relative_phase);
    out.note("closure_error", lq.closure_error);
    out.note("qfi_closed_form", q.qfi);
    out.note("relative_sensitivity_peak", peak);
    out.note("relative_sensitivity_peak_r", r_peak);
    out.plots.push((
        "relative_sensitivity".into(),
        svg::line_plot(
            "frequency-switch relative sensitivity",
            "r",
            "relative sensitivity",
            &[curve(&out.table, "closed_form", "relative_sensitivity", "closed form")],
            Some(1.0),
        ),
    ));
    Ok(out)
}

fn dispersive(c: &ExperimentConfig<DispersiveParams>) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    let d = c.params.expect("resolved");
    let h = hilbert(c)?;
    let osc = initial_state(c, h, &mut out)?;
    for db in c.sweep.expect("resolved").values() {
        let r = db_to_r(db)?;
        let q = dispersive_quantities(&DispersiveParams { r, ..d });
        out.table.push("closed_form", "squeeze_db", db, "r", r, &[]);
        out.table.push("closed_form", "squeeze_db", db, "relative_sensitivity", q.relative_sensitivity, &[]);
    }
    let q = dispersive_quantities(&d);
    let plan = build_dispersive_loop(&d, h)?;
    let rotated = build_dispersive_loop_rotated(&d, h)?;
    out.absorb(plan.warnings());
    out.absorb(rotated.warnings());
    let n = d.n_loops;
    let readout = |plan: &geophase::protocol::ProtocolPlan| -> Result<Checked<f64>> {
        Ok(run_interference(plan, &osc, n)?.map(|i| i.qubit.coherence().arg()))
    };
    let (ph, w1) = readout(&plan)?.into_parts();
    let (pr, w2) = readout(&rotated)?.into_parts();
    out.absorb(&w1);
    out.absorb(&w2);

    // numeric Fisher information for alpha and chi
    let fisher = |f: &dyn Fn(f64) -> DispersiveParams, x0: f64| -> Result<Checked<f64>> {
        let fam = |x: f64| -> Result<Checked<QubitState>> {
            let plan = build_dispersive_loop(&f(x), h)?;
            Ok(run_interference(&plan, &osc, n)?.map(|i| i.qubit))
        };
        let (st, mut w) = Stencil::sample(fam, x0, 1e-6 * x0.abs().max(1.0))?.into_parts();
        let e = st.estimate(FisherMethod::BlochQfi).collect_into(&mut w);
        Ok(Checked::with_warnings(e.value, w))
    };
    let (fa, wa) = fisher(&|a| DispersiveParams { alpha: a, ..d }, d.alpha)?.into_parts();
    let (fc, wc) = fisher(&|x| DispersiveParams { chi: x, ..d }, d.chi)?.into_parts();
    out.absorb(&wa);
    out.absorb(&wc);
    let x = n as f64;
    let t = &mut out.table;
    t.push("numeric", "n_loops", x, "phase", ph, &w1);
    t.push("rotated", "n_loops", x, "phase", pr, &w2);
    t.push("closed_form", "n_loops", x, "phase", x * q.phase, &[]);
    t.push("numeric", "n_loops", x, "qfi_alpha", fa, &wa);
    t.push("numeric", "n_loops", x, "qfi_chi", fc, &wc);
    t.push("closed_form", "n_loops", x, "qfi_alpha", q.qfi_alpha, &[]);
    t.push("closed_form", "n_loops", x, "qfi_chi", q.qfi_chi, &[]);

    out.note("phase_closed_form", x * q.phase);
    out.note("phase_numeric", ph);
    out.note("phase_rotated", pr);
    out.note("qfi_alpha_closed_form", q.qfi_alpha);
    out.note("qfi_alpha_numeric", fa);
    out.note("qfi_chi_closed_form", q.qfi_chi);
    out.note("qfi_chi_numeric", fc);
    out.note("relative_sensitivity_at_config_r", q.relative_sensitivity);
    let last = out.table.curve("closed_form", "relative_sensitivity").last().copied();
    if let Some((db, v)) = last {
        out.note("sweep_stop_db", db);
        out.note("relative_sensitivity_at_sweep_stop", v);
    }
    out.plots.push((
        "relative_sensitivity".into(),
        svg::line_plot(
            "dispersive relative sensitivity (alpha and chi)",
            "squeezing [dB]",
            "relative sensitivity",
            &[curve(&out.table, "closed_form", "relative_sensitivity", "e^r")],
            Some(1.0),
        ),
    ));
    Ok(out)
}

fn noise_lists(n: &Option<NoiseConfig>) -> (Vec<geophase::NoiseKind>, Vec<f64>) {
    let n = n.as_ref().expect("resolved");
    (n.channels.clone().expect("resolved"), n.rates.clone().expect("resolved"))
}

fn noise_sweep(c: &ExperimentConfig<SensingParams>) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    let p = c.params.expect("resolved");
    let h = hilbert(c)?;
    let (channels, rates) = noise_lists(&c.noise);
    let spec = NoiseSweepSpec {
        channels: channels.clone(),
        rates: rates.clone(),
        states: c.states.clone().expect("resolved"),
        params: p,
        step: c.fd_step.expect("resolved"),
    };
    let rows = noise_qfi_sweep(&spec, h)?;
    let mut failures = 0;
    for r in &rows {
        let series = format!("{}/{}", r.channel, r.state);
        let flag = if r.error.is_some() {
            failures += 1;
            "error".to_string()
        } else {
            geophase::diagnostics::flag_string(&r.warnings)
        };
        out.absorb(&r.warnings);
        for (y, v) in [("qfi", r.qfi), ("phase_deviation", r.phase_deviation), ("magnitude_ratio", r.magnitude_ratio)] {
            out.table.push_flag(&series, "lambda", r.rate, y, v, flag.clone());
        }
    }
    out.note("failed_cells", failures);
    out.note("qfi_noiseless_closed_form", qfi_geometric(&p));
    let errors: Vec<Value> = rows
        .iter()
        .filter_map(|r| {
            r.error.as_ref().map(|e| json!({"channel": r.channel, "rate": r.rate, "state": r.state, "error": e}))
        })
        .collect();
    out.note("cell_errors", errors);
    let top = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut per_channel = Map::new();
    for &ch in &channels {
        let cells: Vec<_> = rows.iter().filter(|r| r.channel == ch && r.rate == top).collect();
        let q: Vec<f64> = cells.iter().map(|r| r.qfi).collect();
        let (lo, hi) = q.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let mean = q.iter().sum::<f64>() / q.len() as f64;
        let dev = cells.iter().map(|r| r.phase_deviation.abs()).fold(0.0, f64::max);
        let min_dev = cells.iter().map(|r| r.phase_deviation.abs()).fold(f64::INFINITY, f64::min);
        per_channel.insert(
            ch.name().to_string(),
            json!({"rate": top, "qfi_spread": (hi - lo) / mean, "qfi_mean": mean, "max_abs_phase_deviation": dev, "min_abs_phase_deviation": min_dev}),
        );
    }
    out.note("at_max_rate", Value::Object(per_channel));
    for &ch in &channels {
        let series: Vec<Series> =
            spec.states.iter().map(|s| curve(&out.table, &format!("{}/{}", ch, s.name()), "qfi", s.name())).collect();
        out.plots.push((
            format!("qfi_{}", ch),
            svg::line_plot(&format!("QFI under {}", ch), "lambda", "QFI", &series, None),
        ));
    }
    Ok(out)
}

fn wigner_snapshots(c: &ExperimentConfig<SensingParams>) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    let p = c.params.expect("resolved");
    let h = hilbert(c)?;
    let osc = initial_state(c, h, &mut out)?;
    let spec: WignerSpec = c.wigner.expect("resolved");
    let (channels, rates) = noise_lists(&c.noise);
    let plan = build_geometric_loop(&p, h)?;
    let initial = joint_plus_state(&osc);

    let mut sets: Vec<(String, Option<NoiseChannel>)> = vec![("noiseless".into(), None)];
    for &ch in &channels {
        for &rate in &rates {
            sets.push((format!("{}@{}", ch, number(rate)), Some(NoiseChannel::new(ch, rate)?)));
        }
    }
    let results: Vec<Result<Checked<Vec<Snapshot>>>> =
        sets.iter().map(|(_, ch)| protocol_snapshots(&plan, &initial, *ch, &spec)).collect();
    let mut all = Vec::new();
    for (res, (name, _)) in results.into_iter().zip(&sets) {
        let (snaps, w) = res?.into_parts();
        out.absorb(&w);
        all.push((name.clone(), snaps, w));
    }
    let reference_phase = all[0].1.last().expect("six snapshots").coherence_phase;
    let mut per_set = Map::new();
    for (name, snaps, w) in &all {
        for (k, s) in snaps.iter().enumerate() {
            let series = format!("{}/{}", name, s.label);
            let x = k as f64;
            out.table.push(&series, "step", x, "sigma_x", s.sigma_x, w);
            out.table.push(&series, "step", x, "sigma_y", s.sigma_y, w);
            out.table.push(&series, "step", x, "coherence_phase", s.coherence_phase, w);
        }
        let fin = snaps.last().expect("six snapshots");
        let dev = wrap(fin.coherence_phase - reference_phase);
        out.table.push(&format!("{}/final", name), "step", (snaps.len() - 1) as f64, "phase_vs_noiseless", dev, w);
        let (w0, w5) = (&snaps[0].wigner, &fin.wigner);
        let drift = if w0.spec == w5.spec { w0.max_abs_diff(w5) } else { f64::NAN };
        per_set.insert(name.clone(), json!({"final_phase_vs_noiseless": dev, "wigner_final_vs_initial": drift}));
    }
    for (name, snaps, w) in &all {
        for s in snaps {
            let g = &s.wigner;
            let (xs, ps) = (g.spec.xs(), g.spec.ps());
            for (j, pv) in ps.iter().enumerate() {
                let series = format!("{}/{}/p={}", name, s.label, number(*pv));
                for (i, xv) in xs.iter().enumerate() {
                    out.table.push(&series, "x", *xv, "wigner", g.values[(i, j)], w);
                }
            }
        }
    }
    out.note("snapshot_sets", Value::Object(per_set));
    out.note("snapshots_per_set", all[0].1.len());
    let grids: Vec<Value> = all
        .iter()
        .map(|(name, snaps, _)| {
            let s = snaps[0].wigner.spec;
            json!({"set": name, "x_range": [s.x_range.0, s.x_range.1], "p_range": [s.p_range.0, s.p_range.1], "nx": s.nx, "np": s.np})
        })
        .collect();
    out.note("grids", grids);

    let fns: Vec<Box<dyn Fn(usize, usize) -> f64 + '_>> = all
        .iter()
        .flat_map(|(_, snaps, _)| {
            snaps.iter().map(|s| Box::new(move |i, j| s.wigner.values[(i, j)]) as Box<dyn Fn(usize, usize) -> f64>)
        })
        .collect();
    let titles: Vec<(String, usize, usize)> = all
        .iter()
        .flat_map(|(_, snaps, _)| snaps.iter().map(|s| (s.label.clone(), s.wigner.spec.nx, s.wigner.spec.np)))
        .collect();
    let panels: Vec<Panel<'_>> = titles
        .iter()
        .zip(&fns)
        .map(|((t, nx, np), f)| Panel { title: t.clone(), nx: *nx, np: *np, value: f.as_ref() })
        .collect();
    let labels: Vec<String> = all.iter().map(|(n, _, _)| n.clone()).collect();
    let cols = all[0].1.len();
    let svg = svg::heatmaps("Wigner function per protocol step", &panels, cols, &labels);
    out.plots.push(("wigner".into(), svg));
    Ok(out)
}

fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * std::f64::consts::PI);
    if y > std::f64::consts::PI {
        y - 2.0 * std::f64::consts::PI
    } else {
        y
    }
}

/// First upward crossing of `level` by linear interpolation.
pub fn crossing(points: &[(f64, f64)], level: f64) -> Option<f64> {
    points.windows(2).find_map(|w| {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if (y0 - level) <= 0.0 && (y1 - level) > 0.0 {
            Some(x0 + (level - y0) * (x1 - x0) / (y1 - y0))
        } else {
            None
        }
    })
}

fn sensitivity_curve(sweep: SweepRange) -> RunOutput {
    let mut out = RunOutput::default();
    for db in sweep.values() {
        let r = db_to_r(db).expect("validated sweep");
        out.table.push("closed_form", "squeeze_db", db, "r", r, &[]);
        out.table.push("closed_form", "squeeze_db", db, "delta_eta_r", relative_sensitivity_geometric_at(r), &[]);
    }
    let pts = out.table.curve("closed_form", "delta_eta_r");
    match crossing(&pts, 1.0) {
        Some(x) => out.note("crossing_db", x),
        None => out.note("crossing_db", Value::Null),
    }
    out.note("break_even_db_closed_form", r_to_db(closed_form::break_even_r()).expect("positive"));
    out.note("delta_eta_r_at_15db", relative_sensitivity_geometric_at(db_to_r(15.0).expect("positive")));
    if let Some(&(db, v)) = pts.last() {
        out.note("sweep_stop_db", db);
        out.note("delta_eta_r_at_sweep_stop", v);
    }
    out.plots.push((
        "delta_eta_r".into(),
        svg::line_plot(
            "geometric vs free-evolution sensitivity",
            "squeezing [dB]",
            "delta eta_r",
            &[Series { name: "closed form".into(), points: pts }],
            Some(1.0),
        ),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, y) = golden_max(|x| 2.0 - (x - 0.7).powi(2), 0.0, 3.0);
        assert!((x - 0.7).abs() < 1e-6 && (y - 2.0).abs() < 1e-12);
    }

    #[test]
    fn crossing_interpolates() {
        let pts = [(0.0, 0.5), (1.0, 0.9), (2.0, 1.3)];
        assert!((crossing(&pts, 1.0).unwrap() - 1.25).abs() < 1e-12);
        assert!(crossing(&pts, 5.0).is_none());
    }

    #[test]
    fn wrap_range() {
        assert!((wrap(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap(-0.1) + 0.1).abs() < 1e-15);
    }
}
