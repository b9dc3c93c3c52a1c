//! `dexnet`: fetch pools, generate synthetic streams, build slice graphs and
//! run the analyses, writing CSV/GraphML outputs plus a manifest per run.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};

use dexnet::analytics::{
    average_degree, connected_components, degree_distribution, density, ratio_series, small_world_report,
};
use dexnet::centrality::{
    detect_anomalies_from, eigenvector_centrality, slice_centralities, time_series_from, AnomalyParams,
    CentralityOptions, CentralityVector,
};
use dexnet::communities::louvain;
use dexnet::export::graphml::{restrict_centrality, restrict_communities};
use dexnet::export::reports::{self, MetricRow};
use dexnet::export::{to_graphml, AnalysisReport, GraphBundle, ReportSet};
use dexnet::graph::{build_graph, filter_min_degree, slice_series};
use dexnet::ingest::rpc::{fetch_pool_registry, RpcOptions};
use dexnet::ingest::{
    create_output, read_pool_registry, read_transfers, resolve_edge_events, write_pool_registry, write_transfers,
    ParseOptions,
};
use dexnet::model::segment_blocks;
use dexnet::statfit::{fit_degree_distribution, LogLogOptions};
use dexnet::synth::{generate_stream, SynthParams};
use dexnet::{Address, BlockRange, Platform, SliceIndex, TokenGraph, TokenId};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "dexnet", version, about = "Token network analytics for DEX pool transfers")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

/// `i`, `t<i>` or `all`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum SliceSel {
    One(SliceIndex),
    All,
}

impl FromStr for SliceSel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(SliceSel::All);
        }
        let digits = s.strip_prefix('t').unwrap_or(s);
        digits
            .parse::<u32>()
            .map(|i| SliceSel::One(SliceIndex(i)))
            .map_err(|_| format!("expected a slice number or `all`, got {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExportFormat {
    Graphml,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate a factory's pools over JSON-RPC.
    FetchPools {
        #[arg(long)]
        rpc: String,
        #[arg(long)]
        factory: Address,
        #[arg(long)]
        platform: Platform,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        parallelism: usize,
        #[arg(long, default_value_t = 100)]
        batch_size: usize,
    },
    /// Write a seeded synthetic pool registry and transfer stream.
    Synth {
        #[arg(long)]
        tokens: usize,
        #[arg(long)]
        transfers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Writes `<prefix>.pools.jsonl` and `<prefix>.transfers.jsonl`.
        #[arg(long)]
        out_prefix: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        hub_fraction: f64,
        #[arg(long, default_value_t = 1.0)]
        attachment_exponent: f64,
        #[arg(long, default_value_t = 1.1)]
        zipf_exponent: f64,
        #[arg(long)]
        range: Option<BlockRange>,
        #[arg(long, default_value = "uniswap")]
        platform: Platform,
    },
    /// Build the whole-range graph and the slice graphs of one platform.
    Build {
        #[arg(long)]
        pools: PathBuf,
        #[arg(long)]
        transfers: PathBuf,
        #[arg(long)]
        platform: Platform,
        #[arg(long)]
        range: BlockRange,
        #[arg(long, default_value_t = 100)]
        slices: u32,
        #[arg(long)]
        weighted: bool,
        #[arg(long, default_value_t = 1000)]
        max_errors: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Degree, density, components, diameter, degree histogram, small-world report.
    Analyze {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value = "0")]
        slice: SliceSel,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Eigenvector centrality rankings and per-token time series.
    Centrality {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value = "0")]
        slice: SliceSel,
        #[arg(long)]
        top: Option<usize>,
        #[arg(long)]
        token: Vec<Address>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Flag slices where a token's centrality spikes above its own average.
    Anomalies {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 5.0)]
        threshold: f64,
        #[arg(long, default_value_t = 5)]
        min_slices: usize,
        #[arg(long, default_value_t = 5)]
        exclude_top: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Log-log OLS fit of the degree distribution.
    Powerlaw {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value = "0")]
        slice: SliceSel,
        #[arg(long)]
        min_degree: Option<usize>,
        #[arg(long)]
        log_bins: Option<usize>,
        /// CSV, or JSON when the name ends in `.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Louvain communities.
    Communities {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value = "0")]
        slice: SliceSel,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        resolution: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Graph file for Gephi and similar tools.
    Export {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value = "0")]
        slice: SliceSel,
        #[arg(long)]
        min_degree: Option<usize>,
        #[arg(long)]
        with_centrality: bool,
        #[arg(long)]
        with_communities: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        resolution: f64,
        #[arg(long, value_enum, default_value_t = ExportFormat::Graphml)]
        format: ExportFormat,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Finished, but some power iteration hit its iteration cap.
struct NotConverged;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli.command) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(NotConverged)) => {
            eprintln!("warning: centrality did not converge; outputs were written");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
        Err(e) => {
            let mut message = e.to_string();
            for cause in e.chain().skip(1) {
                let text = cause.to_string();
                if !message.contains(&text) {
                    message = format!("{message}: {text}");
                }
            }
            eprintln!("error: {message}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<dexnet::Error>() {
        Some(dexnet::Error::InvalidParameter(_)) | Some(dexnet::Error::SliceOutOfRange { .. }) => EXIT_USAGE,
        _ if e.downcast_ref::<UsageError>().is_some() => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn run(command: Command) -> anyhow::Result<Option<NotConverged>> {
    match command {
        Command::FetchPools {
            rpc,
            factory,
            platform,
            out,
            parallelism,
            batch_size,
        } => {
            let options = RpcOptions {
                parallelism,
                batch_size,
                ..RpcOptions::default()
            };
            let registry = fetch_pool_registry(&rpc, factory, platform.clone(), options)?;
            let mut w = create_output(&out)?;
            write_pool_registry(&mut w, &registry).with_context(|| format!("writing {}", out.display()))?;
            w.flush().with_context(|| format!("writing {}", out.display()))?;
            drop(w);
            let mut report = AnalysisReport::new("fetch-pools");
            report
                .param("rpc", &rpc)
                .param("factory", factory)
                .param("platform", &platform)
                .output(&out);
            report.summary("pools", registry.len())?;
            report.save(&AnalysisReport::path_for(&out))?;
            info!("fetched {} pools", registry.len());
            Ok(None)
        }

        Command::Synth {
            tokens,
            transfers,
            seed,
            out_prefix,
            hub_fraction,
            attachment_exponent,
            zipf_exponent,
            range,
            platform,
        } => {
            let defaults = SynthParams::default();
            let params = SynthParams {
                n_tokens: tokens,
                n_transfers: transfers,
                p_hub: hub_fraction,
                attachment_exponent,
                zipf_exponent,
                range: range.unwrap_or(defaults.range),
                platform,
                seed,
            };
            let (registry, records) = generate_stream(&params)?;
            let pools_path = with_suffix(&out_prefix, ".pools.jsonl");
            let transfers_path = with_suffix(&out_prefix, ".transfers.jsonl");
            let mut w = create_output(&pools_path)?;
            write_pool_registry(&mut w, &registry).with_context(|| format!("writing {}", pools_path.display()))?;
            w.flush()?;
            let mut w = create_output(&transfers_path)?;
            write_transfers(&mut w, &records).with_context(|| format!("writing {}", transfers_path.display()))?;
            w.flush()?;
            let mut report = AnalysisReport::new("synth");
            report
                .param("tokens", tokens)
                .param("transfers", transfers)
                .param("seed", seed)
                .param("hub_fraction", hub_fraction)
                .param("attachment_exponent", attachment_exponent)
                .param("zipf_exponent", zipf_exponent)
                .param("range", params.range)
                .param("platform", &params.platform)
                .output(&pools_path)
                .output(&transfers_path);
            report.summary("pools", registry.len())?;
            report.save(&with_suffix(&out_prefix, ".manifest.json"))?;
            Ok(None)
        }

        Command::Build {
            pools,
            transfers,
            platform,
            range,
            slices,
            weighted,
            max_errors,
            out,
        } => {
            let options = ParseOptions { max_errors };
            let registry = read_pool_registry(&pools, options)?;
            report_parse_issues(&pools, registry.errors.len(), registry.warnings.len());
            let records = read_transfers(&transfers, range, options)?;
            report_parse_issues(&transfers, records.errors.len(), records.warnings.len());
            let resolved = resolve_edge_events(&records.value, &registry.value);
            if resolved.unknown_pools > 0 {
                warn!("{} transfers reference pools missing from the registry", resolved.unknown_pools);
            }
            let seg = segment_blocks(range, slices)?;
            let whole = build_graph(&resolved.events, &seg, SliceIndex::WHOLE, &platform, weighted)?;
            let series = slice_series(&resolved.events, &seg, &platform, weighted);
            let bundle = GraphBundle::new(seg, whole, series)?;
            bundle.save(&out)?;

            let mut report = AnalysisReport::new("build");
            report
                .param("platform", &platform)
                .param("range", range)
                .param("slices", slices)
                .param("weighted", weighted)
                .param("max_errors", max_errors)
                .input(&pools)?
                .input(&transfers)?
                .output(&out);
            report.summary("pool_parse_errors", registry.errors.len())?;
            report.summary("transfer_parse_errors", records.errors.len())?;
            report.summary("unknown_pool_transfers", resolved.unknown_pools)?;
            report.summary("events", resolved.events.len())?;
            report.summary("nodes", bundle.whole.node_count())?;
            report.summary("edges", bundle.whole.edge_count())?;
            report.save(&AnalysisReport::path_for(&out))?;
            Ok(None)
        }

        Command::Analyze { graph, slice, out_dir } => {
            let bundle = GraphBundle::load(&graph)?;
            let graphs = select(&bundle, slice)?;
            let mut set = ReportSet::default();
            for g in &graphs {
                set.metrics.extend(structural_metrics(g));
            }
            set.degree_histogram = Some(degree_distribution(graphs[0]));
            if slice == SliceSel::All {
                set.ratio_series = Some(ratio_series(&bundle.series)?);
            }
            let written = set.write_to(&out_dir)?;
            let mut report = AnalysisReport::new("analyze");
            report.param("slice", slice_label(slice)).input(&graph)?;
            if let Some(rs) = &set.ratio_series {
                report.summary("ratio_mean", rs.mean)?;
                report.summary("ratio_variance", rs.variance)?;
            }
            finish_dir_report(report, &written, &out_dir)?;
            Ok(None)
        }

        Command::Centrality {
            graph,
            slice,
            top,
            token,
            out_dir,
        } => {
            let bundle = GraphBundle::load(&graph)?;
            let options = CentralityOptions::default();
            let vectors: Vec<CentralityVector> = select(&bundle, slice)?
                .into_iter()
                .map(|g| eigenvector_centrality(g, &options))
                .collect();
            let mut set = ReportSet {
                rankings: Some((vectors.clone(), top)),
                ..ReportSet::default()
            };
            let mut converged = vectors.iter().all(|v| v.converged);
            if !token.is_empty() {
                let per_slice = slice_centralities(&bundle.series, &options);
                converged &= per_slice.iter().all(|v| v.converged);
                for address in &token {
                    let id = bundle
                        .whole
                        .index_of(address)
                        .map(|i| bundle.whole.node(i).clone())
                        .unwrap_or_else(|| TokenId::new(*address));
                    set.centrality_series.push(time_series_from(&per_slice, &id)?);
                }
            }
            let written = set.write_to(&out_dir)?;
            let mut report = AnalysisReport::new("centrality");
            report
                .param("slice", slice_label(slice))
                .param("top", top.map(|k| k.to_string()).unwrap_or_else(|| "all".into()))
                .param("tokens", token.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(","))
                .param("tolerance", options.tolerance)
                .param("max_iter", options.max_iter)
                .input(&graph)?;
            if !converged {
                report.warnings.push("power iteration hit max_iter".into());
            }
            finish_dir_report(report, &written, &out_dir)?;
            Ok((!converged).then_some(NotConverged))
        }

        Command::Anomalies {
            graph,
            threshold,
            min_slices,
            exclude_top,
            out,
        } => {
            let bundle = GraphBundle::load(&graph)?;
            let options = CentralityOptions::default();
            let params = AnomalyParams {
                threshold,
                min_slices,
                exclude_global_top: exclude_top,
            };
            let global = eigenvector_centrality(&bundle.whole, &options);
            let vectors = slice_centralities(&bundle.series, &options);
            let flags = detect_anomalies_from(&vectors, &global, &params)?;
            let converged = global.converged && vectors.iter().all(|v| v.converged);
            write_file(&out, |f| reports::write_anomalies(f, &flags))?;
            let mut report = AnalysisReport::new("anomalies");
            report
                .param("threshold", threshold)
                .param("min_slices", min_slices)
                .param("exclude_top", exclude_top)
                .input(&graph)?
                .output(&out);
            report.summary("flags", flags.len())?;
            if !converged {
                report.warnings.push("power iteration hit max_iter".into());
            }
            report.save(&AnalysisReport::path_for(&out))?;
            Ok((!converged).then_some(NotConverged))
        }

        Command::Powerlaw {
            graph,
            slice,
            min_degree,
            log_bins,
            out,
        } => {
            let bundle = GraphBundle::load(&graph)?;
            let g = single(&bundle, slice)?;
            let hist = degree_distribution(g);
            let fit = fit_degree_distribution(
                &hist,
                &LogLogOptions {
                    min_degree,
                    log_bins_per_decade: log_bins,
                },
            )?;
            if out.extension().is_some_and(|e| e == "json") {
                write_file(&out, |f| Ok(serde_json::to_writer_pretty(f, &fit)?))?;
            } else {
                write_file(&out, |f| reports::write_powerlaw(f, g.platform(), g.slice(), &fit))?;
            }
            let mut report = AnalysisReport::new("powerlaw");
            report
                .param("slice", g.slice())
                .param("min_degree", min_degree.unwrap_or(1))
                .param("log_bins", log_bins.map(|b| b.to_string()).unwrap_or_else(|| "none".into()))
                .input(&graph)?
                .output(&out);
            report.summary("fit", &fit)?;
            report.save(&AnalysisReport::path_for(&out))?;
            Ok(None)
        }

        Command::Communities {
            graph,
            slice,
            seed,
            resolution,
            out,
        } => {
            let bundle = GraphBundle::load(&graph)?;
            let g = single(&bundle, slice)?;
            check_resolution(resolution)?;
            let assignment = louvain(g, resolution, seed);
            write_file(&out, |f| reports::write_communities(f, &assignment))?;
            let mut report = AnalysisReport::new("communities");
            report
                .param("slice", g.slice())
                .param("seed", seed)
                .param("resolution", resolution)
                .input(&graph)?
                .output(&out);
            report.summary("communities", assignment.count)?;
            report.summary("modularity", assignment.modularity)?;
            report.save(&AnalysisReport::path_for(&out))?;
            Ok(None)
        }

        Command::Export {
            graph,
            slice,
            min_degree,
            with_centrality,
            with_communities,
            seed,
            resolution,
            format: ExportFormat::Graphml,
            out,
        } => {
            let bundle = GraphBundle::load(&graph)?;
            let full = single(&bundle, slice)?;
            let g = match min_degree {
                Some(d) => filter_min_degree(full, d),
                None => full.clone(),
            };
            let centrality = with_centrality.then(|| eigenvector_centrality(full, &CentralityOptions::default()));
            if with_communities {
                check_resolution(resolution)?;
            }
            let communities = with_communities.then(|| louvain(full, resolution, seed));
            let cv = centrality.as_ref().map(|c| restrict_centrality(c, &g));
            let ca = communities.as_ref().map(|c| restrict_communities(c, &g));
            let doc = to_graphml(&g, cv.as_ref(), ca.as_ref())?;
            std::fs::write(&out, doc).with_context(|| format!("writing {}", out.display()))?;
            let converged = centrality.as_ref().is_none_or(|c| c.converged);

            let mut report = AnalysisReport::new("export");
            report
                .param("slice", g.slice())
                .param("format", "graphml")
                .param("min_degree", min_degree.unwrap_or(0))
                .param("with_centrality", with_centrality)
                .param("with_communities", with_communities)
                .param("seed", seed)
                .param("resolution", resolution)
                .input(&graph)?
                .output(&out);
            report.summary("nodes", g.node_count())?;
            report.summary("edges", g.edge_count())?;
            if !converged {
                report.warnings.push("power iteration hit max_iter".into());
            }
            report.save(&AnalysisReport::path_for(&out))?;
            Ok((!converged).then_some(NotConverged))
        }
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn report_parse_issues(path: &Path, errors: usize, warnings: usize) {
    if errors > 0 || warnings > 0 {
        warn!("{}: {errors} malformed lines skipped, {warnings} warnings", path.display());
    }
}

fn check_resolution(resolution: f64) -> anyhow::Result<()> {
    if !(resolution.is_finite() && resolution > 0.0) {
        bail!(UsageError(format!("resolution must be positive, got {resolution}")));
    }
    Ok(())
}

fn slice_label(sel: SliceSel) -> String {
    match sel {
        SliceSel::One(s) => s.to_string(),
        SliceSel::All => "all".into(),
    }
}

fn select(bundle: &GraphBundle, sel: SliceSel) -> anyhow::Result<Vec<&TokenGraph>> {
    Ok(match sel {
        SliceSel::One(s) => vec![bundle.graph(s)?],
        SliceSel::All => std::iter::once(&bundle.whole).chain(bundle.series.iter()).collect(),
    })
}

fn single(bundle: &GraphBundle, sel: SliceSel) -> anyhow::Result<&TokenGraph> {
    match sel {
        SliceSel::One(s) => Ok(bundle.graph(s)?),
        SliceSel::All => bail!(UsageError("this command takes a single slice".into())),
    }
}

/// Metrics of one graph; those undefined on it (e.g. density with fewer than
/// two nodes, small-world figures without an edge) are left out.
fn structural_metrics(g: &TokenGraph) -> Vec<MetricRow> {
    let mut values: Vec<(&str, f64)> = vec![("nodes", g.node_count() as f64), ("edges", g.edge_count() as f64)];
    if let Ok(r) = average_degree(g) {
        values.push(("average_degree", r.value()));
    }
    if let Ok(r) = density(g) {
        values.push(("density", r.value()));
    }
    let components = connected_components(g);
    values.push(("components", components.len() as f64));
    if let Ok(sw) = small_world_report(g) {
        values.push(("giant_size", sw.giant_size as f64));
        values.push(("diameter_of_giant", sw.diameter_of_giant as f64));
        values.push(("ln_n", sw.ln_n));
        values.push(("small_world_ratio", sw.ratio));
    }
    values
        .into_iter()
        .map(|(metric, value)| MetricRow {
            platform: g.platform().clone(),
            slice: g.slice(),
            metric: metric.into(),
            value,
        })
        .collect()
}

fn write_file<F>(path: &Path, write: F) -> anyhow::Result<()>
where
    F: FnOnce(&mut File) -> dexnet::Result<()>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write(&mut file)?;
    Ok(())
}

fn finish_dir_report(mut report: AnalysisReport, written: &[PathBuf], out_dir: &Path) -> anyhow::Result<()> {
    for p in written {
        report.output(p);
    }
    report.save(&out_dir.join("manifest.json"))?;
    Ok(())
}
