//! Fixed-format text summaries of JSON outputs.

use std::fmt::Write as _;

use serde_json::Value;

use crate::commands::SCHEMA_VERSION;
use crate::error::CliError;

fn num(v: &Value) -> String {
    match v.as_f64() {
        Some(0.0) => "0".into(),
        Some(x) if x.abs() >= 1e-3 && x.abs() < 1e6 => {
            let s = format!("{x:.6}");
            let s = s.trim_end_matches('0').trim_end_matches('.');
            s.to_string()
        }
        Some(x) => format!("{x:.3e}"),
        None => "n/a".into(),
    }
}

fn point(v: &Value) -> String {
    match v.as_array() {
        Some(xs) => format!("({})", xs.iter().map(num).collect::<Vec<_>>().join(", ")),
        None => "n/a".into(),
    }
}

fn pass(v: &Value) -> &'static str {
    if v.as_bool() == Some(true) {
        "PASS"
    } else {
        "FAIL"
    }
}

fn text(v: &Value) -> &str {
    v.as_str().unwrap_or("n/a")
}

fn witness_line(out: &mut String, w: &Value) {
    if w.is_null() {
        let _ = writeln!(out, "witness: none");
        return;
    }
    let what = match (text(&w["violated"]["condition"]), w["violated"]["channel"].as_u64()) {
        ("generator_inequality", _) => "generator inequality".to_string(),
        ("coupling_channel", Some(k)) => format!("coupling of channel {k}"),
        ("coupling_sum", _) => "summed coupling".to_string(),
        (other, _) => other.to_string(),
    };
    let _ = writeln!(
        out,
        "witness: {what} violated at {}: value {}, tolerance {}",
        point(&w["point"]),
        num(&w["value"]),
        num(&w["tolerance"])
    );
}

fn verification(out: &mut String, r: &Value, label: &str) {
    let ci = &r["condition_i"];
    let _ = writeln!(out, "conclusion: {}", text(&r["conclusion"]));
    let _ = writeln!(
        out,
        "points checked: {} ({} in C); alpha: {}",
        r["points_checked"],
        r["points_in_c"],
        text(&r["alpha"])
    );
    let _ = writeln!(
        out,
        "{label} condition (i): {} (min margin {} at {}, {} violations)",
        pass(&ci["holds"]),
        num(&ci["min_margin"]),
        point(&ci["min_margin_point"]),
        ci["violations"]
    );
    let cii = &r["condition_ii"];
    if !cii.is_null() {
        let per: Vec<String> =
            cii["max_abs_per_channel"].as_array().map(|a| a.iter().map(num).collect()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{label} condition (ii): {} (max |coupling| per channel [{}], max |sum| {}, mode {}, {} violations)",
            pass(&cii["holds"]),
            per.join(", "),
            num(&cii["max_abs_sum"]),
            text(&cii["mode"]),
            cii["violations"]
        );
    }
    witness_line(out, &r["witness"]);
    let tol = &r["tolerances"];
    let _ = writeln!(out, "tolerances: {}; {}", text(&tol["tol_i"]), text(&tol["tol_ii"]));
}

fn render_check(out: &mut String, res: &Value) {
    let _ = writeln!(out, "barrier: h = {}; domain: {}", text(&res["barrier"]), text(&res["domain"]));
    verification(out, &res["report"], "SZBF");
    for (key, name) in [("growth", "growth"), ("lipschitz", "Lipschitz")] {
        let e = &res["assumption_1"][key];
        let _ = writeln!(
            out,
            "Assumption 1 {name} estimate: L >= {} ({} samples, sampled lower bound)",
            num(&e["constant_l"]),
            e["num_samples"]
        );
    }
    for d in res["diagnostics"].as_array().into_iter().flatten() {
        let _ = writeln!(out, "{}: {}", text(&d["severity"]), text(&d["message"]));
    }
}

fn zero_term(out: &mut String, v: &Value, name: &str) {
    let _ = write!(out, "{name}: {} (max |term| {}", pass(&v["holds"]), num(&v["max_abs"]));
    if !v["witness"].is_null() {
        let _ = write!(out, ", witness {}", point(&v["witness"]));
    }
    let _ = writeln!(out, ")");
}

fn render_lemma1(out: &mut String, res: &Value) {
    let r = &res["report"];
    let _ = writeln!(out, "barrier: h = {}; domain: {}", text(&res["barrier"]), text(&res["domain"]));
    zero_term(out, &r["condition_i"], "Lemma 1 (i) second-order diffusion term vanishes");
    zero_term(out, &r["condition_ii"], "Lemma 1 (ii) diffusion coupling vanishes");
    let _ = writeln!(out, "Lemma 1 conclusion: {}", text(&r["conclusion"]));
    let cross = match r["cross_validated"].as_bool() {
        Some(true) => "yes",
        Some(false) => "NO",
        None => "not applicable",
    };
    let _ = writeln!(out, "cross-validated by SZBF check: {cross}; max margin gap {}", num(&r["max_margin_gap"]));
    let _ = writeln!(out, "-- drift-only ZBF check");
    verification(out, &r["drift_only"], "ZBF");
    let _ = writeln!(out, "-- SZBF check on the same samples");
    verification(out, &r["szbf"], "SZBF");
}

fn render_sim(out: &mut String, res: &Value) {
    let s = &res["stats"];
    let _ = writeln!(out, "barrier: h = {}; initial condition: {}", text(&res["barrier"]), text(&res["initial_condition"]));
    let _ = writeln!(out, "paths: {}, dt {}, horizon {}", s["n_paths"], num(&s["dt"]), num(&s["horizon"]));
    let ci = &s["wilson_ci_95"];
    let _ = writeln!(
        out,
        "exits: {} of {} ({} exploded); empirical exit probability {} (95% Wilson CI [{}, {}])",
        s["n_exited"],
        s["n_paths"],
        s["n_exploded"],
        num(&s["empirical_exit_prob"]),
        num(&ci[0]),
        num(&ci[1])
    );
    let t = &s["exit_times"];
    if !t.is_null() {
        let _ = writeln!(out, "exit times: min {}, median {}, max {}", num(&t["min"]), num(&t["median"]), num(&t["max"]));
    }
    let _ = writeln!(out, "evidence: {}", text(&s["evidence"]));
}

fn lyapunov_line(out: &mut String, c: &Value, name: &str) {
    let _ = write!(out, "{name}: {} ({} points, {} violations", pass(&c["holds"]), c["points"], c["violations"]);
    if !c["witness"].is_null() {
        let _ = write!(out, ", witness {}", point(&c["witness"]));
    }
    let _ = writeln!(out, ")");
}

fn render_stability(out: &mut String, res: &Value) {
    let l = &res["lyapunov"];
    let p = &res["profile"];
    let _ = writeln!(
        out,
        "barrier: h = {}; domain: {}; alpha: {}",
        text(&res["barrier"]),
        text(&res["domain"]),
        text(&res["alpha"])
    );
    let _ = writeln!(out, "Lyapunov conclusion: {}", text(&l["conclusion"]));
    lyapunov_line(out, &l["zero_on_c"], "V_C = 0 on C");
    lyapunov_line(out, &l["positive_off_c"], "V_C > 0 off C");
    lyapunov_line(out, &l["decrease_off_c"], "LV_C <= alpha(-V_C) <= 0 off C");
    if !l["max_decrease_gap"].is_null() {
        let _ = writeln!(out, "max LV_C - alpha(-V_C) off C: {}", num(&l["max_decrease_gap"]));
    }
    let _ = writeln!(
        out,
        "stability profile P[sup dist(x_t, C) > eps] ({} paths, dt {}, horizon {}; {}):",
        p["n_paths"],
        num(&p["dt"]),
        num(&p["horizon"]),
        text(&p["distance_surrogate"])
    );
    let eps: Vec<String> = p["eps_levels"].as_array().into_iter().flatten().map(num).collect();
    let _ = writeln!(out, "  dist \\ eps  {}", eps.iter().map(|e| format!("{e:>8}")).collect::<String>());
    let dists = p["init_distances"].as_array().cloned().unwrap_or_default();
    let rows = p["prob_matrix"].as_array().cloned().unwrap_or_default();
    let unreliable = p["unreliable_rows"].as_array().cloned().unwrap_or_default();
    for (i, (d, row)) in dists.iter().zip(&rows).enumerate() {
        let cells: String = row.as_array().into_iter().flatten().map(|v| format!("{:>8}", num(v))).collect();
        let flag = if unreliable.get(i).and_then(Value::as_bool) == Some(true) { "  (unreliable)" } else { "" };
        let _ = writeln!(out, "  {:<10}  {cells}{flag}", num(d));
    }
    for (key, v) in [("Lyapunov", &l["assumed_hypotheses"]), ("profile", &p["assumed_hypotheses"])] {
        for h in v.as_array().into_iter().flatten() {
            let _ = writeln!(out, "assumed ({key}): {}", text(h));
        }
    }
}

/// Renders one JSON output; rejects other schema versions.
pub fn render_one(name: &str, doc: &Value) -> Result<String, CliError> {
    match doc["schema_version"].as_u64() {
        Some(v) if v == SCHEMA_VERSION as u64 => {}
        Some(v) => {
            return Err(CliError::Report(format!(
                "{name}: schema_version {v} is not supported (expected {SCHEMA_VERSION})"
            )))
        }
        None => return Err(CliError::Report(format!("{name}: missing schema_version"))),
    }
    let command = text(&doc["command"]).to_string();
    let res = &doc["result"];
    let mut out = String::new();
    let _ = writeln!(
        out,
        "== {command}: model {} (seed {}) [{name}]",
        text(&doc["model"]),
        doc["seed"]
    );
    match command.as_str() {
        "check" => render_check(&mut out, res),
        "lemma1" => render_lemma1(&mut out, res),
        "simulate" | "exit-prob" => render_sim(&mut out, res),
        "stability" => render_stability(&mut out, res),
        other => return Err(CliError::Report(format!("{name}: unknown command {other:?}"))),
    }
    Ok(out)
}
