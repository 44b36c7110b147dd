use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{
    action_punishment_curve, extract_opportunities, forgiveness_table, leniency_table, link_taxonomy, mann_whitney,
    mean_se, opportunism_rate, treatment_of, walk, FBins, MeanSe, HISTORY_ROUNDS, MAIN_ROUNDS,
};
use crate::log::{EventLog, Record};
use crate::netmetrics::{classify_types, mean_defined, snapshot};

/// Human-subject reference values for one grid cell: mean cooperation rate
/// and welfare over rounds 2 to 21. Printed for comparison only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PaperReference {
    pub cell: &'static str,
    pub cooperation_rate: f64,
    pub welfare: f64,
}

pub const PAPER_TABLE1: [PaperReference; 4] = [
    PaperReference { cell: "slow-nounc", cooperation_rate: 0.255, welfare: 56.29 },
    PaperReference { cell: "slow-unc", cooperation_rate: 0.144, welfare: -20.29 },
    PaperReference { cell: "fast-nounc", cooperation_rate: 0.285, welfare: 96.11 },
    PaperReference { cell: "fast-unc", cooperation_rate: 0.198, welfare: 20.96 },
];

fn cell_of(log: &EventLog) -> Option<&'static PaperReference> {
    let c = &log.header.config;
    if c.group_size != 12 {
        return None;
    }
    let speed = match c.pairs_per_round {
        6 => "slow",
        33 => "fast",
        _ => return None,
    };
    let unc = if c.noise_eps > 0.0 { "unc" } else { "nounc" };
    let name = format!("{speed}-{unc}");
    PAPER_TABLE1.iter().find(|r| r.cell == name)
}

/// Per-log averages over the main rounds: the unit of independence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogMeasures {
    pub treatment: String,
    pub values: BTreeMap<&'static str, Option<f64>>,
}

pub const MEASURES: [&str; 10] = [
    "cooperation_rate",
    "intended_cooperators",
    "welfare",
    "avg_degree",
    "avg_clustering",
    "h_type_c",
    "ih_type_c",
    "ih_type_d",
    "avg_betweenness_type_c",
    "avg_betweenness",
];

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn log_measures(log: &EventLog) -> LogMeasures {
    let mut coop = Vec::new();
    let mut intended = Vec::new();
    let mut welfare = Vec::new();
    for r in &log.records {
        if let Record::RoundSummary { round, cooperation_rate, intended_cooperators, welfare: w, .. } = r {
            if MAIN_ROUNDS.contains(round) {
                coop.push(*cooperation_rate);
                intended.push(*intended_cooperators);
                welfare.push(*w as f64);
            }
        }
    }
    let labels = classify_types(log);
    let mut per_round: BTreeMap<&'static str, Vec<Option<f64>>> = BTreeMap::new();
    walk(log, |ctx| {
        if !MAIN_ROUNDS.contains(&ctx.round) {
            return;
        }
        let s = snapshot(ctx.played, &labels);
        let mut put = |k: &'static str, v: Option<f64>| per_round.entry(k).or_default().push(v);
        put("avg_degree", Some(s.avg_degree));
        put("avg_clustering", s.avg_clustering);
        put("h_type_c", s.type_c.h);
        put("ih_type_c", s.type_c.ih);
        put("ih_type_d", s.type_d.ih);
        put("avg_betweenness_type_c", s.avg_betweenness_type_c);
        put("avg_betweenness", Some(s.avg_betweenness_normalized));
    });
    let mut values = BTreeMap::new();
    values.insert("cooperation_rate", mean(&coop));
    values.insert("intended_cooperators", mean(&intended));
    values.insert("welfare", mean(&welfare));
    for (k, v) in per_round {
        values.insert(k, mean_defined(v));
    }
    LogMeasures { treatment: treatment_of(&log.header), values }
}

fn fmt(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v:.6}"),
        None => "undefined".into(),
    }
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(&row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

/// All tables of one analysis run, keyed by file name.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub files: BTreeMap<String, String>,
    /// Treatment means per measure, for programmatic use.
    pub means: BTreeMap<(String, String), MeanSe>,
}

impl AnalysisReport {
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        for (name, text) in &self.files {
            fs::write(dir.join(name), text)?;
        }
        Ok(())
    }
}

const NOTE: &str = "Behavioral measures are stratified frequency tables, not regression estimates: \
the original logit models control for demographics a simulator does not have. \
The punishment curve is a binned empirical frequency, the closest reproducible analogue of model-estimated likelihoods.";

pub fn report(logs: &[EventLog]) -> AnalysisReport {
    let mut files = BTreeMap::new();
    let per_log: Vec<LogMeasures> = logs.iter().map(log_measures).collect();
    let mut groups: BTreeMap<String, Vec<&LogMeasures>> = BTreeMap::new();
    for m in &per_log {
        groups.entry(m.treatment.clone()).or_default().push(m);
    }
    let samples = |t: &str, k: &str| -> Vec<f64> {
        groups.get(t).map(|ms| ms.iter().filter_map(|m| m.values.get(k).copied().flatten()).collect()).unwrap_or_default()
    };

    let mut means = BTreeMap::new();
    let mut rows = Vec::new();
    for t in groups.keys() {
        for k in MEASURES {
            let ms = mean_se(&samples(t, k));
            rows.push(vec![t.clone(), k.to_string(), ms.n.to_string(), fmt(ms.mean), fmt(ms.se)]);
            means.insert((t.clone(), k.to_string()), ms);
        }
    }
    files.insert("treatment_means.csv".into(), csv_text(&["treatment", "measure", "n_logs", "mean", "se"], rows));

    let mut refs = BTreeMap::new();
    for log in logs {
        if let Some(r) = cell_of(log) {
            refs.insert(treatment_of(&log.header), r);
        }
    }
    let rows = refs.iter().map(|(t, r)| {
        let sim = means.get(&(t.clone(), "cooperation_rate".to_string())).and_then(|m| m.mean);
        let w = means.get(&(t.clone(), "welfare".to_string())).and_then(|m| m.mean);
        vec![t.clone(), r.cell.into(), fmt(sim), r.cooperation_rate.to_string(), fmt(w), r.welfare.to_string()]
    });
    files.insert(
        "paper_reference.csv".into(),
        csv_text(&["treatment", "cell", "cooperation_rate", "paper_cooperation_rate", "welfare", "paper_welfare"], rows),
    );

    let names: Vec<&String> = groups.keys().collect();
    let mut rows = Vec::new();
    for k in MEASURES {
        for (i, a) in names.iter().enumerate() {
            for b in &names[i + 1..] {
                let (xs, ys) = (samples(a, k), samples(b, k));
                if xs.is_empty() || ys.is_empty() {
                    continue;
                }
                let r = mann_whitney(&xs, &ys);
                let method = serde_json::to_value(r.method).expect("enum").as_str().unwrap_or_default().to_string();
                rows.push(vec![
                    k.to_string(),
                    a.to_string(),
                    b.to_string(),
                    xs.len().to_string(),
                    ys.len().to_string(),
                    r.u.to_string(),
                    format!("{:.6}", r.p_two_sided),
                    method,
                ]);
            }
        }
    }
    files.insert(
        "mann_whitney.csv".into(),
        csv_text(&["measure", "treatment_a", "treatment_b", "n_a", "n_b", "u", "p_two_sided", "method"], rows),
    );

    let mut rows = Vec::new();
    for (id, log) in logs.iter().enumerate() {
        let t = treatment_of(&log.header);
        for r in &log.records {
            if let Record::RoundSummary { round, cooperation_rate, intended_cooperators, welfare, .. } = r {
                rows.push(vec![
                    t.clone(),
                    id.to_string(),
                    round.to_string(),
                    cooperation_rate.to_string(),
                    intended_cooperators.to_string(),
                    welfare.to_string(),
                ]);
            }
        }
    }
    files.insert(
        "time_series.csv".into(),
        csv_text(&["treatment", "log", "round", "cooperation_rate", "intended_cooperators", "welfare"], rows),
    );

    let obs = extract_opportunities(logs, HISTORY_ROUNDS);
    let freq_rows = |cells: Vec<super::FreqCell>| {
        cells
            .into_iter()
            .map(|c| {
                vec![
                    c.treatment.clone(),
                    c.subset.to_string(),
                    c.bucket.as_str().to_string(),
                    c.n.to_string(),
                    c.hits.to_string(),
                    fmt(c.freq()),
                    fmt(c.se()),
                ]
            })
            .collect::<Vec<_>>()
    };
    let head = ["treatment", "subset", "bucket", "n", "hits", "frequency", "se"];
    files.insert("leniency.csv".into(), csv_text(&head, freq_rows(leniency_table(&obs))));
    files.insert("forgiveness.csv".into(), csv_text(&head, freq_rows(forgiveness_table(&obs, true))));

    let rows = action_punishment_curve(logs, &FBins::default(), MAIN_ROUNDS).into_iter().map(|c| {
        vec![c.treatment.clone(), c.bin.clone(), c.n.to_string(), c.defections.to_string(), fmt(c.freq()), fmt(c.mean_f)]
    });
    files.insert(
        "punishment_curve.csv".into(),
        csv_text(&["treatment", "f_bin", "n", "defections", "p_defect", "mean_f"], rows),
    );

    let rows = opportunism_rate(logs, HISTORY_ROUNDS).into_iter().map(|r| {
        vec![
            r.treatment.clone(),
            r.n_at_least_4.to_string(),
            fmt(r.rate()),
            r.n_exactly_4.to_string(),
            fmt(r.rate_exactly_4()),
        ]
    });
    files.insert(
        "opportunism.csv".into(),
        csv_text(&["treatment", "n_at_least_4", "rate_at_least_4", "n_exactly_4", "rate_exactly_4"], rows),
    );

    let rows = link_taxonomy(logs)
        .into_iter()
        .map(|r| vec![r.treatment.clone(), r.origin.as_str().into(), r.count.to_string(), fmt(r.mean_duration)]);
    files.insert("link_taxonomy.csv".into(), csv_text(&["treatment", "origin", "count", "mean_duration"], rows));

    let summary = serde_json::json!({
        "note": NOTE,
        "logs": logs.len(),
        "treatments": groups.iter().map(|(t, ms)| (t.clone(), ms.len())).collect::<BTreeMap<_, _>>(),
        "main_rounds": [MAIN_ROUNDS.start(), MAIN_ROUNDS.end()],
        "history_rounds": [HISTORY_ROUNDS.start(), HISTORY_ROUNDS.end()],
        "betweenness": "normalized by (n-1)(n-2)/2",
        "standard_errors": "across per-log means",
        "paper_table1": PAPER_TABLE1,
    });
    files.insert("summary.json".into(), serde_json::to_string_pretty(&summary).expect("json") + "\n");

    AnalysisReport { files, means }
}
