//! The `docbi` command line. [`run`] takes the argument list and output
//! streams explicitly so tests can drive it in-process.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::Utc;
use clap::{Parser, Subcommand};
use docbi_core::mart::{Audience, MartSpec, Measure};
use docbi_core::query::parse_query;
use docbi_core::warehouse::{EnrichmentSource, SelectionFilter};

use crate::api::{serve, StoreConfig};
use crate::error::GatewayError;
use crate::store::Store;

#[derive(Debug, Parser)]
#[command(name = "docbi", version, about = "Business intelligence over a bibliographic warehouse")]
struct Cli {
    /// Store directory.
    #[arg(long, global = true, env = "DOCBI_DATA", default_value = "docbi-data")]
    data: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load line-delimited JSON records through a selection filter.
    Ingest {
        file: PathBuf,
        /// e.g. `require=title,year;types=report;years=2000..2005`
        #[arg(long)]
        filter: Option<String>,
    },
    /// List attributes with their coverage.
    Schema,
    /// Report missing attributes or values.
    Gaps {
        #[arg(long, value_delimiter = ',', required = true)]
        require: Vec<String>,
    },
    /// Fill an attribute from a two-column `join_key,value` CSV.
    Enrich {
        csv: PathBuf,
        #[arg(long)]
        join: String,
        #[arg(long)]
        target: String,
        /// Source name; defaults to the file stem.
        #[arg(long)]
        name: Option<String>,
    },
    /// Evaluate a Boolean request.
    Query {
        text: String,
        /// Personalize the order for this identity.
        #[arg(long)]
        user: Option<String>,
    },
    /// Show documents and facets under a path of `attr=value` steps.
    Explore { steps: Vec<String> },
    /// Data mart operations.
    Mart {
        #[command(subcommand)]
        action: MartCommand,
    },
    /// Recommend documents never recommended to the user before.
    Recommend {
        #[arg(long)]
        user: String,
        #[arg(short = 'n', default_value_t = 5)]
        n: usize,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: String,
        /// Rebuild every built mart this often, in seconds.
        #[arg(long)]
        refresh_interval: Option<u64>,
    },
}

#[derive(Debug, Subcommand)]
enum MartCommand {
    Build { name: String },
    Refresh { name: String },
    List,
    Export { name: String },
    /// Register a custom mart spec.
    Define {
        name: String,
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<String>,
        /// doc-count or access-count
        #[arg(long, default_value = "doc-count")]
        measure: String,
        #[arg(long)]
        constraint: Option<String>,
        #[arg(long, default_value = "leadership")]
        audience: String,
    },
}

/// Runs one command and returns the process exit status: 0 on success, 1 for
/// usage, validation or syntax errors, 2 for I/O errors.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    1
                }
            };
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn open_input(path: &Path) -> Result<File, GatewayError> {
    File::open(path).map_err(|source| GatewayError::Input {
        path: path.to_path_buf(),
        source,
    })
}

fn enum_arg<T: serde::de::DeserializeOwned>(what: &str, raw: &str, wire: String) -> Result<T, GatewayError> {
    serde_json::from_value(serde_json::Value::String(wire))
        .map_err(|_| GatewayError::Invalid(format!("unknown {what} {raw:?}")))
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), GatewayError> {
    let write_err = |e: std::io::Error| GatewayError::Input {
        path: PathBuf::from("<stdout>"),
        source: e,
    };
    macro_rules! say {
        ($($arg:tt)*) => { writeln!(out, $($arg)*).map_err(write_err)? };
    }

    if let Command::Serve { listen, refresh_interval } = &cli.command {
        let config = StoreConfig {
            data_dir: cli.data.clone(),
            listen_address: listen.clone(),
            refresh_interval: refresh_interval.map(Duration::from_secs),
        };
        let runtime = tokio::runtime::Runtime::new().map_err(|e| GatewayError::Startup(e.to_string()))?;
        return runtime.block_on(serve(config));
    }

    let mut store = Store::open(&cli.data)?;
    match cli.command {
        Command::Ingest { file, filter } => {
            let filter: SelectionFilter = match filter {
                Some(text) => text.parse().map_err(docbi_core::Error::from)?,
                None => SelectionFilter::permissive(),
            };
            let input = BufReader::new(open_input(&file)?);
            let report = store.mutate(|e| e.ingest(input, &filter))?;
            say!("accepted {}", report.accepted);
            say!("merged_duplicates {}", report.merged_duplicates);
            say!("rejected {}", report.rejected.len());
            for r in &report.rejected {
                say!("rejected line {}: {}", r.line, r.reason);
            }
        }
        Command::Schema => {
            for d in store.engine().schema() {
                say!("{} {} {}/{}", d.name, d.kind.as_str(), d.present, d.total);
            }
        }
        Command::Gaps { require } => {
            for entry in store.engine().detect_gaps(&require).entries {
                say!("{} {} {}", entry.attribute, entry.gap_kind.as_str(), entry.affected_docs);
            }
        }
        Command::Enrich { csv, join, target, name } => {
            let name = name.unwrap_or_else(|| {
                csv.file_stem()
                    .map_or_else(|| "source".to_string(), |s| s.to_string_lossy().into_owned())
            });
            let source = EnrichmentSource::from_csv(name, &join, &target, open_input(&csv)?)
                .map_err(docbi_core::Error::from)?;
            let report = store.mutate(|e| Ok(e.enrich(&source)))?;
            say!("docs_updated {}", report.docs_updated);
            say!("values_written {}", report.values_written);
            say!("unmatched_keys {}", report.unmatched_keys.join(","));
            for d in &report.disagreements {
                say!("disagreement {} chosen {} others {}", d.doc_id, d.chosen, d.others.join(","));
            }
        }
        Command::Query { text, user } => {
            for id in store.engine().query(&text, user.as_deref())?.doc_ids {
                say!("{id}");
            }
        }
        Command::Explore { steps } => {
            let path = steps
                .iter()
                .map(|s| {
                    s.split_once('=')
                        .map(|(a, v)| (a.to_string(), v.to_string()))
                        .ok_or_else(|| GatewayError::Invalid(format!("expected attr=value, got {s:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let view = store.engine().explore(&path);
            for id in &view.documents {
                say!("doc {id}");
            }
            for (attr, counts) in &view.facets {
                for c in counts {
                    say!("facet {attr} {} {}", c.value, c.count);
                }
            }
        }
        Command::Mart { action } => match action {
            MartCommand::Build { name } => {
                let mart = store.mutate(|e| e.build_mart(&name, Utc::now()))?;
                write!(out, "{}", mart.to_csv()).map_err(write_err)?;
            }
            MartCommand::Refresh { name } => {
                let mart = store.mutate(|e| e.refresh_mart(&name, Utc::now()))?;
                write!(out, "{}", mart.to_csv()).map_err(write_err)?;
            }
            MartCommand::Export { name } => {
                write!(out, "{}", store.engine().export_mart(&name)?).map_err(write_err)?;
            }
            MartCommand::List => {
                for spec in store.engine().mart_specs() {
                    let versions = store.engine().marts().versions(&spec.name).len();
                    say!(
                        "{} dims={} measure={} versions={versions}",
                        spec.name,
                        spec.dimensions.join(","),
                        serde_json::to_value(spec.measure).expect("enum serializes").as_str().unwrap_or("?"),
                    );
                }
            }
            MartCommand::Define {
                name,
                dims,
                measure,
                constraint,
                audience,
            } => {
                let measure: Measure = enum_arg("measure", &measure, measure.replace('-', "_"))?;
                let audience: Audience = enum_arg("audience", &audience, audience.replace('_', "-"))?;
                let dims: Vec<&str> = dims.iter().map(String::as_str).collect();
                let mut spec = MartSpec::new(name, &dims, measure, audience);
                if let Some(c) = constraint {
                    spec = spec.with_constraint(parse_query(&c).map_err(docbi_core::Error::from)?);
                }
                let name = spec.name.clone();
                store.mutate(|e| e.register_mart(spec))?;
                say!("defined {name}");
            }
        },
        Command::Recommend { user, n } => {
            for id in store.mutate(|e| e.recommend(&user, n, Utc::now()))? {
                say!("{id}");
            }
        }
        Command::Serve { .. } => unreachable!("handled above"),
    }
    Ok(())
}
