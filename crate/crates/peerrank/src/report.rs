//! Report assembly: joins tensors, metrics, ratings, and ground-truth
//! validation into one serializable cohort report, then renders it to
//! JSON, CSV tables, and self-contained SVG charts under the run's
//! `reports/` directory.
//!
//! Output is byte-deterministic for a given store: collections iterate in
//! canonical order, floats are printed with fixed precision, and nothing
//! time- or host-dependent (wall clocks, locales, paths) is embedded.
//! Undefined values render as empty cells / JSON nulls, never as 0.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use crate::elo;
use crate::groundtruth::{self, TruthReport};
use crate::metrics;
use crate::stats;
use crate::store::{RunStore, StoreError};
use crate::tensor::ScoreTensor;
use crate::types::{Category, ModelId, ModelSpec, Regime};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("report io failure at {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Serializable mirror of a statistical test outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestSummary {
    pub statistic: f64,
    pub p_value: f64,
    pub df: f64,
    pub n: usize,
    pub effect_size: Option<f64>,
    pub significance: &'static str,
}

impl From<stats::TestResult> for TestSummary {
    fn from(t: stats::TestResult) -> Self {
        TestSummary {
            significance: stats::significance_stars(t.p_value),
            statistic: t.statistic,
            p_value: t.p_value,
            df: t.df,
            n: t.n,
            effect_size: t.effect_size,
        }
    }
}

/// Aggregates observed under one judging regime.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeSection {
    pub regime: Regime,
    pub evaluation_count: usize,
    pub aggregates: Vec<metrics::ModelAggregate>,
    /// Mean self score minus mean peer score, per model.
    pub self_preference: Vec<Option<f64>>,
}

/// All quantified judging distortions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasSection {
    /// Self-preference under the fully controlled regime.
    pub self_preference: Vec<Option<f64>>,
    /// Peer-mean change when author names become visible (needs both the
    /// name-visible and the fully controlled regime).
    pub name_shift: Option<Vec<Option<f64>>>,
    /// Peer-mean change when display order is fixed instead of shuffled.
    pub position_shift: Option<Vec<Option<f64>>>,
    /// Mean score by displayed position under shuffled order, peers only.
    pub position_lift: Vec<metrics::PositionLiftRow>,
    pub position_slope: Option<f64>,
    pub home_advantage: metrics::HomeAdvantage,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EloSection {
    pub models: Vec<ModelId>,
    pub ratings: Vec<f64>,
    pub match_count: usize,
    pub k_factor: f64,
    pub initial_rating: f64,
    pub vs_peer_pearson: Option<TestSummary>,
    pub vs_peer_spearman: Option<TestSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadarRow {
    pub model_id: ModelId,
    /// Values parallel to `RadarSection::axes`, each min-max normalized
    /// to [0, 1] with "higher is better" orientation.
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadarSection {
    pub axes: Vec<&'static str>,
    pub rows: Vec<RadarRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyRow {
    pub model_id: ModelId,
    pub avg_latency_ms: Option<f64>,
    pub peer_mean: Option<f64>,
}

/// The whole evaluation read-out for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortReport {
    pub run_id: String,
    pub seed: u64,
    pub cohort: Vec<ModelSpec>,
    pub categories: Vec<Category>,
    pub questions_total: usize,
    pub grounding_provider: String,
    /// The regime all headline numbers are read from.
    pub baseline_regime: Regime,
    pub regimes: Vec<RegimeSection>,
    pub biases: BiasSection,
    pub category_breakdown: Vec<metrics::CategoryBreakdown>,
    pub autopsy: metrics::AutopsyReport,
    pub judge_agreement: Vec<Vec<Option<f64>>>,
    pub cross_eval: Vec<Vec<Option<f64>>>,
    pub elo: Option<EloSection>,
    pub provider_effect: Option<TestSummary>,
    /// Why the provider contrast is absent, when it is.
    pub provider_effect_note: Option<String>,
    pub radar: RadarSection,
    pub latency: Vec<LatencyRow>,
    pub truth: Option<TruthReport>,
}

/// Picks the regime headline numbers come from: the fully controlled
/// regime when the run has it, else the first regime on the manifest.
fn baseline_regime(regimes: &[Regime]) -> Regime {
    if regimes.contains(&Regime::BASELINE) {
        Regime::BASELINE
    } else {
        regimes.first().copied().unwrap_or(Regime::BASELINE)
    }
}

/// Assembles the full report from a run's persisted records.
pub fn build_report(store: &RunStore) -> Result<CohortReport, ReportError> {
    let manifest = store.manifest();
    let baseline = baseline_regime(&manifest.regimes);
    let baseline_tensor = store.load_tensor(baseline)?;
    let questions = store.questions();

    let mut regime_sections = Vec::new();
    let mut tensors: Vec<(Regime, ScoreTensor)> = Vec::new();
    for &regime in &manifest.regimes {
        let tensor = store.load_tensor(regime)?;
        regime_sections.push(RegimeSection {
            regime,
            evaluation_count: tensor.len(),
            aggregates: metrics::aggregates(&tensor),
            self_preference: metrics::self_preference(&tensor),
        });
        tensors.push((regime, tensor));
    }
    let tensor_for = |wanted: Regime| tensors.iter().find(|(r, _)| *r == wanted).map(|(_, t)| t);

    let name_shift = tensor_for(Regime::ShuffleOnly)
        .filter(|_| baseline == Regime::ShuffleBlind)
        .and_then(|t| metrics::peer_mean_shift(t, &baseline_tensor).ok());
    let position_shift = tensor_for(Regime::BlindOnly)
        .filter(|_| baseline == Regime::ShuffleBlind)
        .and_then(|t| metrics::peer_mean_shift(t, &baseline_tensor).ok());

    let lift_records = if baseline.shuffle() {
        store.evaluations(baseline)
    } else {
        manifest
            .regimes
            .iter()
            .find(|r| r.shuffle())
            .map(|&r| store.evaluations(r))
            .unwrap_or(&[])
    };
    let biases = BiasSection {
        self_preference: metrics::self_preference(&baseline_tensor),
        name_shift,
        position_shift,
        position_lift: metrics::position_lift(lift_records, true),
        position_slope: metrics::position_slope(lift_records, true),
        home_advantage: metrics::home_advantage(&baseline_tensor, questions),
    };

    let aggregates = metrics::aggregates(&baseline_tensor);
    let elo_section = (!baseline_tensor.is_empty()).then(|| {
        let table = elo::rate_tensor(&baseline_tensor, manifest.seed);
        let paired: Vec<(f64, f64)> = table
            .models
            .iter()
            .zip(&table.ratings)
            .filter_map(|(model, &rating)| {
                aggregates
                    .iter()
                    .find(|a| &a.model_id == model)
                    .and_then(|a| a.peer_mean)
                    .map(|p| (rating, p))
            })
            .collect();
        let ratings: Vec<f64> = paired.iter().map(|p| p.0).collect();
        let peers: Vec<f64> = paired.iter().map(|p| p.1).collect();
        EloSection {
            vs_peer_pearson: stats::pearson(&ratings, &peers).ok().map(Into::into),
            vs_peer_spearman: stats::spearman(&ratings, &peers).ok().map(Into::into),
            models: table.models,
            ratings: table.ratings,
            match_count: table.match_count,
            k_factor: table.k_factor,
            initial_rating: table.initial_rating,
        }
    });

    let (provider_effect, provider_effect_note) =
        match metrics::provider_effect(manifest, &aggregates) {
            Ok(t) => (Some(t.into()), None),
            Err(e) => (None, Some(e.to_string())),
        };

    let avg_latency: Vec<Option<f64>> = manifest
        .model_ids()
        .iter()
        .map(|model| {
            let latencies: Vec<f64> = store
                .answers()
                .iter()
                .filter(|a| &a.respondent_id == model)
                .map(|a| a.latency_ms as f64)
                .collect();
            if latencies.is_empty() {
                None
            } else {
                Some(latencies.iter().sum::<f64>() / latencies.len() as f64)
            }
        })
        .collect();
    let latency = manifest
        .model_ids()
        .iter()
        .zip(&avg_latency)
        .map(|(model, &avg)| LatencyRow {
            model_id: model.clone(),
            avg_latency_ms: avg,
            peer_mean: aggregates
                .iter()
                .find(|a| &a.model_id == model)
                .and_then(|a| a.peer_mean),
        })
        .collect();

    let peer_means: Vec<Option<f64>> = aggregates.iter().map(|a| a.peer_mean).collect();
    let peer_sds: Vec<Option<f64>> = aggregates.iter().map(|a| a.peer_sd).collect();
    let generosity: Vec<Option<f64>> = aggregates.iter().map(|a| a.generosity).collect();
    let radar = RadarSection {
        axes: vec!["quality", "speed", "consistency", "humility", "strictness"],
        rows: {
            let quality = metrics::minmax_normalize(&peer_means, false);
            let speed = metrics::minmax_normalize(&avg_latency, true);
            let consistency = metrics::minmax_normalize(&peer_sds, true);
            let humility = metrics::minmax_normalize(&biases.self_preference, true);
            let strictness = metrics::minmax_normalize(&generosity, true);
            baseline_tensor
                .models()
                .iter()
                .enumerate()
                .map(|(i, model)| RadarRow {
                    model_id: model.clone(),
                    values: vec![quality[i], speed[i], consistency[i], humility[i], strictness[i]],
                })
                .collect()
        },
    };

    let truth = if store.benchmark_items().is_empty() {
        None
    } else {
        let bench_tensor = store.load_benchmark_tensor()?;
        Some(groundtruth::truth_validation(
            store.benchmark_items(),
            store.benchmark_answers(),
            &bench_tensor,
        ))
    };

    Ok(CohortReport {
        run_id: manifest.run_id.clone(),
        seed: manifest.seed,
        cohort: manifest.cohort.clone(),
        categories: manifest.categories.clone(),
        questions_total: manifest.questions_total,
        grounding_provider: manifest.grounding_provider.clone(),
        baseline_regime: baseline,
        regimes: regime_sections,
        biases,
        category_breakdown: metrics::category_breakdown(&baseline_tensor, questions),
        autopsy: metrics::question_autopsy(&baseline_tensor, questions),
        judge_agreement: metrics::judge_agreement(&baseline_tensor),
        cross_eval: metrics::cross_eval_matrix(&baseline_tensor),
        elo: elo_section,
        provider_effect,
        provider_effect_note,
        radar,
        latency,
        truth,
    })
}

// ── rendering ────────────────────────────────────────────────────────────

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn csv_line(fields: &[String]) -> String {
    fields
        .iter()
        .map(|f| csv_escape(f))
        .collect::<Vec<_>>()
        .join(",")
}

fn leaderboard_csv(report: &CohortReport) -> String {
    let baseline = report
        .regimes
        .iter()
        .find(|s| s.regime == report.baseline_regime);
    let mut rows: Vec<(usize, &metrics::ModelAggregate)> = baseline
        .map(|s| s.aggregates.iter().enumerate().collect())
        .unwrap_or_default();
    // Rank by peer mean, highest first; models without one sink to the
    // bottom. Ties keep canonical order.
    rows.sort_by(|(ia, a), (ib, b)| {
        match (b.peer_mean, a.peer_mean) {
            (Some(x), Some(y)) => x.partial_cmp(&y).unwrap_or(std::cmp::Ordering::Equal),
            (Some(_), None) => std::cmp::Ordering::Greater,
            (None, Some(_)) => std::cmp::Ordering::Less,
            (None, None) => std::cmp::Ordering::Equal,
        }
        .then(ia.cmp(ib))
    });
    let mut out = String::from(
        "rank,model_id,display_name,peer_mean,overall_mean,self_mean,generosity,peer_sd,elo,truth_score\n",
    );
    for (rank, (_, a)) in rows.iter().enumerate() {
        let display = report
            .cohort
            .iter()
            .find(|s| s.model_id == a.model_id)
            .map(|s| s.display_name.clone())
            .unwrap_or_default();
        let elo = report
            .elo
            .as_ref()
            .and_then(|e| {
                e.models
                    .iter()
                    .position(|m| *m == a.model_id)
                    .map(|i| e.ratings[i])
            });
        let truth_score = report.truth.as_ref().and_then(|t| {
            t.rows
                .iter()
                .find(|r| r.model_id == a.model_id)
                .and_then(|r| r.truth_score)
        });
        out.push_str(&csv_line(&[
            (rank + 1).to_string(),
            a.model_id.to_string(),
            display,
            fmt_opt(a.peer_mean),
            fmt_opt(a.overall_mean),
            fmt_opt(a.self_mean),
            fmt_opt(a.generosity),
            fmt_opt(a.peer_sd),
            fmt_opt(elo),
            fmt_opt(truth_score),
        ]));
        out.push('\n');
    }
    out
}

fn cross_eval_csv(report: &CohortReport) -> String {
    let models: Vec<String> = report.cohort.iter().map(|s| s.model_id.to_string()).collect();
    let mut header = vec!["evaluator".to_string()];
    header.extend(models.iter().cloned());
    let mut out = csv_line(&header);
    out.push('\n');
    for (i, row) in report.cross_eval.iter().enumerate() {
        let mut fields = vec![models.get(i).cloned().unwrap_or_default()];
        fields.extend(row.iter().map(|v| fmt_opt(*v)));
        out.push_str(&csv_line(&fields));
        out.push('\n');
    }
    out
}

fn biases_csv(report: &CohortReport) -> String {
    let mut out =
        String::from("model_id,self_preference,name_shift,position_shift,home_delta\n");
    for (i, spec) in report.cohort.iter().enumerate() {
        let get = |v: &Option<Vec<Option<f64>>>| v.as_ref().and_then(|v| v.get(i).copied().flatten());
        out.push_str(&csv_line(&[
            spec.model_id.to_string(),
            fmt_opt(report.biases.self_preference.get(i).copied().flatten()),
            fmt_opt(get(&report.biases.name_shift)),
            fmt_opt(get(&report.biases.position_shift)),
            fmt_opt(report.biases.home_advantage.per_model.get(i).copied().flatten()),
        ]));
        out.push('\n');
    }
    out
}

fn autopsy_csv(report: &CohortReport) -> String {
    let mut out = String::from("question_id,author_id,category,difficulty,controversy,n_scores\n");
    for row in &report.autopsy.rows {
        out.push_str(&csv_line(&[
            row.question_id.to_string(),
            row.author_id.to_string(),
            row.category.as_str().to_string(),
            format!("{:.6}", row.difficulty),
            fmt_opt(row.controversy),
            row.n_scores.to_string(),
        ]));
        out.push('\n');
    }
    out
}

fn elo_csv(report: &CohortReport) -> String {
    let mut out = String::from("model_id,rating\n");
    if let Some(elo) = &report.elo {
        let mut rows: Vec<(usize, &ModelId, f64)> = elo
            .models
            .iter()
            .enumerate()
            .map(|(i, m)| (i, m, elo.ratings[i]))
            .collect();
        rows.sort_by(|a, b| {
            b.2.partial_cmp(&a.2)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        for (_, model, rating) in rows {
            out.push_str(&csv_line(&[model.to_string(), format!("{rating:.6}")]));
            out.push('\n');
        }
    }
    out
}

/// Horizontal bar chart of peer means, highest on top.
fn leaderboard_svg(report: &CohortReport) -> String {
    let baseline = report
        .regimes
        .iter()
        .find(|s| s.regime == report.baseline_regime);
    let mut rows: Vec<(String, f64)> = baseline
        .map(|s| {
            s.aggregates
                .iter()
                .filter_map(|a| a.peer_mean.map(|p| (a.model_id.to_string(), p)))
                .collect()
        })
        .unwrap_or_default();
    rows.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    let bar_h = 24;
    let gap = 8;
    let label_w = 180;
    let chart_w = 600;
    let height = 50 + rows.len() * (bar_h + gap);
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{height}\" viewBox=\"0 0 {} {height}\">\n",
        label_w + chart_w + 80,
        label_w + chart_w + 80
    );
    let _ = write!(
        svg,
        "<text x=\"10\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">Peer score leaderboard (1-10)</text>\n"
    );
    for (i, (model, peer)) in rows.iter().enumerate() {
        let y = 44 + i * (bar_h + gap);
        let w = (peer / 10.0 * chart_w as f64).max(1.0);
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"13\" text-anchor=\"end\">{}</text>\n",
            label_w - 8,
            y + bar_h / 2 + 4,
            xml_escape(model)
        );
        let _ = write!(
            svg,
            "<rect x=\"{label_w}\" y=\"{y}\" width=\"{w:.2}\" height=\"{bar_h}\" fill=\"#4878a8\"/>\n"
        );
        let _ = write!(
            svg,
            "<text x=\"{:.2}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\">{peer:.3}</text>\n",
            label_w as f64 + w + 6.0,
            y + bar_h / 2 + 4
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Scatter of rating against peer mean — the agreement between the two
/// ranking routes at a glance.
fn elo_scatter_svg(report: &CohortReport) -> String {
    let Some(elo) = &report.elo else {
        return String::from(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"200\" height=\"40\"><text x=\"10\" y=\"24\" font-family=\"sans-serif\" font-size=\"13\">no rating data</text></svg>\n",
        );
    };
    let points: Vec<(String, f64, f64)> = elo
        .models
        .iter()
        .zip(&elo.ratings)
        .filter_map(|(model, &rating)| {
            report
                .latency
                .iter()
                .find(|l| &l.model_id == model)
                .and_then(|l| l.peer_mean)
                .map(|p| (model.to_string(), p, rating))
        })
        .collect();
    let (w, h, pad) = (640.0f64, 420.0f64, 60.0f64);
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    );
    let _ = write!(
        svg,
        "<text x=\"10\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">Rating vs peer mean</text>\n"
    );
    if points.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let min_max = |sel: fn(&(String, f64, f64)) -> f64| {
        let lo = points.iter().map(sel).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(sel).fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 1.0, hi + 1.0)
        }
    };
    let (x_lo, x_hi) = min_max(|p| p.1);
    let (y_lo, y_hi) = min_max(|p| p.2);
    let _ = write!(
        svg,
        "<line x1=\"{pad}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#888\"/>\n<line x1=\"{pad}\" y1=\"40\" x2=\"{pad}\" y2=\"{:.2}\" stroke=\"#888\"/>\n",
        h - pad,
        w - 20.0,
        h - pad,
        h - pad
    );
    for (model, peer, rating) in &points {
        let x = pad + (peer - x_lo) / (x_hi - x_lo) * (w - pad - 40.0);
        let y = (h - pad) - (rating - y_lo) / (y_hi - y_lo) * (h - pad - 60.0);
        let _ = write!(svg, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"5\" fill=\"#a85048\"/>\n");
        let _ = write!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"11\">{}</text>\n",
            x + 7.0,
            y - 5.0,
            xml_escape(model)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders every report artifact into `reports/` and returns the written
/// paths (stable order).
pub fn write_reports(store: &RunStore) -> Result<(CohortReport, Vec<PathBuf>), ReportError> {
    let report = build_report(store)?;
    let dir = store.reports_dir();
    fs::create_dir_all(&dir).map_err(|source| ReportError::Io {
        path: dir.clone(),
        source,
    })?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    let artifacts: Vec<(&str, String)> = vec![
        ("cohort_report.json", json),
        ("leaderboard.csv", leaderboard_csv(&report)),
        ("cross_eval_matrix.csv", cross_eval_csv(&report)),
        ("biases.csv", biases_csv(&report)),
        ("question_autopsy.csv", autopsy_csv(&report)),
        ("elo.csv", elo_csv(&report)),
        ("leaderboard.svg", leaderboard_svg(&report)),
        ("elo_vs_peer.svg", elo_scatter_svg(&report)),
    ];
    let mut paths = Vec::new();
    for (name, content) in artifacts {
        let path = dir.join(name);
        fs::write(&path, content).map_err(|source| ReportError::Io {
            path: path.clone(),
            source,
        })?;
        paths.push(path);
    }
    Ok((report, paths))
}
