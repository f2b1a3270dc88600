//! `noma-sim`: scenario runner, BER sweeps, attack suite, and reports for
//! the secure NOMA data-handover scheme.
//!
//! Exit codes: 0 success, 1 recovery failure, 2 config error, 3 internal
//! error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use noma_handover::crypto::{
    derive_private_key, derive_public_key, CurveParams, DeviceIdentity, KBox,
};
use noma_handover::ledger::{IdentityLedger, RegistrationRecord};
use noma_handover::sim::{
    ber_csv, ber_summary, ber_sweep, run_attacks, run_scenario, EvidenceRef, FeatureReport,
    ReportResults, ScenarioConfig, Scheme, SimError,
};

#[derive(Parser)]
#[command(name = "noma-sim", version, about)]
struct Cli {
    /// Scenario config file (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config's seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for traces and reports
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Output format for machine-readable artifacts
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Derive an identity-based key pair and print or write the key file
    Keygen {
        #[arg(long)]
        imei: String,
        /// Colon-separated hex, e.g. 00:11:22:33:44:55
        #[arg(long)]
        mac: String,
        #[arg(long)]
        timestamp_ms: u64,
        #[arg(long)]
        lat_udeg: i64,
        #[arg(long)]
        lon_udeg: i64,
        /// Write the key file here instead of stdout
        #[arg(long)]
        key_out: Option<PathBuf>,
    },
    /// Manage the public-key ledger file
    Ledger {
        #[command(subcommand)]
        action: LedgerAction,
    },
    /// Run the configured scenario end-to-end
    Run,
    /// Run the configured BER sweep
    Ber,
    /// Run the adversary suite against the secure scheme
    Attack,
    /// Run scenario + attacks and emit the feature report
    Report,
}

#[derive(Subcommand)]
enum LedgerAction {
    /// Create a fresh ledger file with only the genesis block
    Init {
        #[arg(long)]
        ledger: PathBuf,
    },
    /// Append a public-key registration
    Register {
        #[arg(long)]
        ledger: PathBuf,
        #[arg(long)]
        ue_id: String,
        /// 66-hex-char compressed public point
        #[arg(long)]
        public_key: String,
        #[arg(long, default_value_t = 0)]
        registered_at_ms: u64,
    },
    /// Recompute every hash and link
    Verify {
        #[arg(long)]
        ledger: PathBuf,
    },
    /// Print the chain
    Show {
        #[arg(long)]
        ledger: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                SimError::Parse(_) | SimError::Validation(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig, SimError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| SimError::Validation("--config is required for this command".into()))?;
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write_out(dir: &Path, name: &str, content: &str) -> Result<EvidenceRef, SimError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, content)?;
    println!("wrote {}", path.display());
    Ok(EvidenceRef::for_content(name, content.as_bytes()))
}

fn dispatch(cli: &Cli) -> Result<ExitCode, SimError> {
    match &cli.command {
        Command::Keygen {
            imei,
            mac,
            timestamp_ms,
            lat_udeg,
            lon_udeg,
            key_out,
        } => {
            let mac = parse_mac(mac)
                .ok_or_else(|| SimError::Validation(format!("bad mac {mac:?}")))?;
            let identity = DeviceIdentity {
                imei: imei.clone(),
                mac,
                timestamp_ms: *timestamp_ms,
                lat_udeg: *lat_udeg,
                lon_udeg: *lon_udeg,
            };
            let curve = CurveParams::secp256k1();
            let private = derive_private_key(&identity, &curve)
                .map_err(|e| SimError::Validation(e.to_string()))?;
            let public = derive_public_key(&private, &curve)
                .map_err(|e| SimError::Validation(e.to_string()))?;
            let kbox = KBox {
                own_private: private,
                own_public: public,
                bs_private: None,
            };
            match key_out {
                Some(path) => std::fs::write(path, kbox.to_key_file())?,
                None => print!("{}", kbox.to_key_file()),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Ledger { action } => ledger_command(action),
        Command::Run => {
            let cfg = load_config(cli)?;
            let output = run_scenario(&cfg)?;
            write_out(&cli.out, "trace.jsonl", &output.trace.to_jsonl())?;
            let payloads = cfg.resolve_payloads()?;
            let recovered = output.all_recovered(&payloads);
            for (ue_id, outcome) in &output.trace.outcomes {
                println!("{ue_id}: {}", serde_json::to_string(outcome).unwrap());
            }
            // a noiseless secure run must deliver everything
            if cfg.scheme == Scheme::Secure && cfg.noise_sigma == 0.0 && !recovered {
                return Ok(ExitCode::from(1));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Ber => {
            let cfg = load_config(cli)?;
            let reports = ber_sweep(&cfg)?;
            match cli.format {
                Format::Csv => write_out(&cli.out, "ber.csv", &ber_csv(&reports))?,
                Format::Json => write_out(
                    &cli.out,
                    "ber.json",
                    &serde_json::to_string_pretty(&reports).unwrap(),
                )?,
            };
            println!("{}", ber_summary(&reports));
            Ok(ExitCode::SUCCESS)
        }
        Command::Attack => {
            let cfg = load_config(cli)?;
            let (output, report) = run_attacks(&cfg)?;
            write_out(&cli.out, "trace.jsonl", &output.trace.to_jsonl())?;
            write_out(
                &cli.out,
                "attack_report.json",
                &serde_json::to_string_pretty(&report).unwrap(),
            )?;
            for outcome in &report.outcomes {
                println!(
                    "{:?}: {}",
                    outcome.kind,
                    if outcome.blocked { "blocked" } else { "SUCCEEDED" }
                );
            }
            Ok(if report.all_blocked() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Report => {
            let cfg = load_config(cli)?;
            match cfg.scheme {
                Scheme::Secure => {
                    let (output, attacks) = run_attacks(&cfg)?;
                    let trace_ev =
                        write_out(&cli.out, "trace_secure.jsonl", &output.trace.to_jsonl())?;
                    let attack_ev = write_out(
                        &cli.out,
                        "attack_report.json",
                        &serde_json::to_string_pretty(&attacks).unwrap(),
                    )?;
                    let report = FeatureReport::build(&ReportResults {
                        scheme: Scheme::Secure,
                        secure: output.session.as_ref(),
                        legacy_trace: None,
                        attacks: Some(&attacks),
                        evidence: vec![trace_ev, attack_ev],
                    })?;
                    finish_report(cli, &report)
                }
                Scheme::Legacy => {
                    let output = run_scenario(&cfg)?;
                    let trace_ev =
                        write_out(&cli.out, "trace_legacy.jsonl", &output.trace.to_jsonl())?;
                    let report = FeatureReport::build(&ReportResults {
                        scheme: Scheme::Legacy,
                        secure: None,
                        legacy_trace: Some(&output.trace),
                        attacks: None,
                        evidence: vec![trace_ev],
                    })?;
                    finish_report(cli, &report)
                }
            }
        }
    }
}

fn finish_report(cli: &Cli, report: &FeatureReport) -> Result<ExitCode, SimError> {
    write_out(
        &cli.out,
        "feature_report.json",
        &serde_json::to_string_pretty(report).unwrap(),
    )?;
    report.self_check(&cli.out)?;
    print!("{}", report.to_text());
    Ok(ExitCode::SUCCESS)
}

fn ledger_command(action: &LedgerAction) -> Result<ExitCode, SimError> {
    match action {
        LedgerAction::Init { ledger } => {
            let chain = IdentityLedger::init();
            std::fs::write(ledger, chain.to_file_string())?;
            println!("initialized ledger at {}", ledger.display());
            Ok(ExitCode::SUCCESS)
        }
        LedgerAction::Register {
            ledger,
            ue_id,
            public_key,
            registered_at_ms,
        } => {
            let text = std::fs::read_to_string(ledger)?;
            let mut chain = IdentityLedger::from_file_string(&text)
                .map_err(|e| SimError::Validation(e.to_string()))?;
            let pk = hex::decode(public_key)
                .map_err(|e| SimError::Validation(format!("bad public key hex: {e}")))?;
            let block = chain
                .register_public_key(RegistrationRecord {
                    ue_id: ue_id.clone(),
                    public_key: pk,
                    registered_at_ms: *registered_at_ms,
                })
                .map_err(|e| SimError::Validation(e.to_string()))?;
            println!("registered {ue_id} in block {}", block.index);
            std::fs::write(ledger, chain.to_file_string())?;
            Ok(ExitCode::SUCCESS)
        }
        LedgerAction::Verify { ledger } => {
            let text = std::fs::read_to_string(ledger)?;
            let chain = IdentityLedger::from_file_string(&text)
                .map_err(|e| SimError::Validation(e.to_string()))?;
            let verdict = chain.verify_chain();
            println!("{}", serde_json::to_string(&verdict).unwrap());
            Ok(if verdict.is_valid() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        LedgerAction::Show { ledger } => {
            let text = std::fs::read_to_string(ledger)?;
            let chain = IdentityLedger::from_file_string(&text)
                .map_err(|e| SimError::Validation(e.to_string()))?;
            print!("{}", chain.to_file_string());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn parse_mac(s: &str) -> Option<[u8; 6]> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 6 {
        return None;
    }
    let mut mac = [0u8; 6];
    for (i, part) in parts.iter().enumerate() {
        mac[i] = u8::from_str_radix(part, 16).ok()?;
    }
    Some(mac)
}
