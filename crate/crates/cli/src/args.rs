use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, Args, Command, CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::CliError;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(name = "uwchirp", version, about = "Chirp-based underwater acoustic PHY toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Build a frame and write it as an IQ file.
    Modulate(ModulateArgs),
    /// Pass an IQ file through a multipath + AWGN channel.
    Channel(ChannelArgs),
    /// Detect, demodulate and optionally decode an IQ file.
    Demod(DemodArgs),
    /// Run a Monte-Carlo study and write CSV metrics.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat `key = value` file; keys are long flag names.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Print the resolved configuration to stderr.
    #[arg(long)]
    pub verbose: bool,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ChirpArgs {
    /// Spreading factor, 6..=10.
    #[arg(long, default_value_t = 8)]
    pub sf: u32,
    #[arg(long, default_value_t = 6000.0)]
    pub bw: f64,
    /// Oversampling factor.
    #[arg(long, default_value_t = 2)]
    pub os: usize,
    /// linear | quadratic
    #[arg(long, default_value = "quadratic")]
    pub kind: String,
    #[arg(long, default_value_t = 25_000.0)]
    pub carrier: f64,
    #[arg(long, default_value_t = 8)]
    pub preamble: usize,
    #[arg(long, default_value_t = 2)]
    pub sfd: usize,
}

#[derive(Debug, Args)]
pub struct CodecArgs {
    #[arg(long, default_value_t = 400)]
    pub info_bits: usize,
    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
    /// Parity-check construction seed.
    #[arg(long, default_value_t = 1)]
    pub code_seed: u64,
    /// fft | naive
    #[arg(long, default_value = "fft")]
    pub check_rule: String,
    /// Exact symbol-to-bit LLR marginalization for the binary code.
    #[arg(long)]
    pub exact_bit_llr: bool,
}

#[derive(Debug, Args)]
pub struct ReceiverArgs {
    #[arg(long, default_value_t = 1.5)]
    pub energy_factor: f64,
    #[arg(long, default_value_t = 0.35)]
    pub path_threshold: f64,
    #[arg(long, default_value_t = 0.75)]
    pub sfd_ratio: f64,
    #[arg(long, default_value_t = 8)]
    pub max_paths: usize,
    /// Exclusion radius in samples; defaults to `os`.
    #[arg(long)]
    pub cancellation_len: Option<usize>,
    /// literal | adaptive | gaussian | fixed factor
    #[arg(long, default_value = "adaptive")]
    pub llr_scaling: String,
    /// Spread cap on decoder inputs; `none` disables.
    #[arg(long, default_value = "20")]
    pub llr_cap: String,
}

#[derive(Debug, Args)]
pub struct ModulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub chirp: ChirpArgs,
    #[command(flatten)]
    pub codec: CodecArgs,
    /// Raw payload bytes, bits taken MSB first.
    #[arg(long, value_name = "FILE", conflicts_with = "random", required_unless_present = "random")]
    pub payload: Option<PathBuf>,
    /// Draw this many random payload bits from `--seed`.
    #[arg(long, value_name = "N")]
    pub random: Option<usize>,
    /// nb_ldpc | bin_ldpc | hamming48
    #[arg(long, value_name = "SCHEME", conflicts_with = "no_encode")]
    pub encode: Option<String>,
    /// Map payload bits straight onto symbols (the default).
    #[arg(long)]
    pub no_encode: bool,
    /// Also write the payload bits as raw bytes.
    #[arg(long, value_name = "FILE")]
    pub bits_out: Option<PathBuf>,
    #[arg(long, short, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ChannelArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, short, value_name = "FILE")]
    pub out: PathBuf,
    /// Stored channel profile (JSON).
    #[arg(long, value_name = "FILE", conflicts_with_all = ["paths", "max_delay", "gain"])]
    pub profile: Option<PathBuf>,
    /// Random profile with this many paths.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Largest random path delay in samples; defaults to one symbol.
    #[arg(long)]
    pub max_delay: Option<usize>,
    /// uniform | unit
    #[arg(long)]
    pub gain: Option<String>,
    /// SNR in dB, overriding the profile's; `inf` for noiseless.
    #[arg(long, allow_hyphen_values = true)]
    pub snr: Option<String>,
}

#[derive(Debug, Args)]
pub struct DemodArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub codec: CodecArgs,
    #[command(flatten)]
    pub receiver: ReceiverArgs,
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// merge | nomerge
    #[arg(long, default_value = "merge")]
    pub mode: String,
    #[arg(long, default_value_t = 8)]
    pub preamble: usize,
    #[arg(long, default_value_t = 2)]
    pub sfd: usize,
    /// nb_ldpc | bin_ldpc | hamming48
    #[arg(long, value_name = "SCHEME", conflicts_with = "symbols")]
    pub decode: Option<String>,
    /// Payload symbols when not decoding.
    #[arg(long)]
    pub symbols: Option<usize>,
    /// Reference payload bits (raw bytes, MSB first).
    #[arg(long, value_name = "FILE")]
    pub truth: Option<PathBuf>,
    /// Write recovered bits as raw bytes.
    #[arg(long, value_name = "FILE")]
    pub bits_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub chirp: ChirpArgs,
    #[command(flatten)]
    pub receiver: ReceiverArgs,
    /// collision | awgn | multipath
    #[arg(long)]
    pub exp: String,
    #[arg(long, conflicts_with = "paper_scale")]
    pub trials: Option<usize>,
    /// Full-scale trial counts.
    #[arg(long)]
    pub paper_scale: bool,
    /// Comma list of SNRs in dB; `inf` is noiseless.
    #[arg(long, allow_hyphen_values = true)]
    pub snr: Option<String>,
    /// Comma list of path counts (collision).
    #[arg(long)]
    pub paths: Option<String>,
    /// Comma list of chirp kinds (collision).
    #[arg(long)]
    pub kinds: Option<String>,
    /// Comma list of schemes.
    #[arg(long)]
    pub schemes: Option<String>,
    /// Comma list of receiver modes (multipath).
    #[arg(long)]
    pub modes: Option<String>,
    /// uniform | unit, secondary path amplitudes in the collision study.
    #[arg(long)]
    pub collision_gain: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub code_seed: u64,
    /// Profile directory; defaults to UWCHIRP_PROFILE_DIR or the shipped set.
    #[arg(long, value_name = "DIR")]
    pub profiles: Option<PathBuf>,
    /// CSV destination; stdout when absent.
    #[arg(long, short, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

/// Parsed arguments plus the resolved `key = value` listing.
pub struct Parsed {
    pub cli: Cli,
    pub resolved: String,
}

fn usage(e: clap::Error) -> CliError {
    CliError::Usage(e.render().to_string())
}

fn sub_matches(m: &ArgMatches) -> (&str, &ArgMatches) {
    m.subcommand().expect("subcommand is required")
}

fn find_sub<'a>(cmd: &'a Command, name: &str) -> &'a Command {
    cmd.get_subcommands().find(|s| s.get_name() == name).expect("known subcommand")
}

fn parse_config_file(path: &PathBuf) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{}:{}: expected key = value", path.display(), no + 1)))?;
        out.push((k.trim().replace('_', "-"), v.trim().to_string()));
    }
    Ok(out)
}

fn strict(cmd: &Command, argv: &[OsString]) -> Result<ArgMatches, CliError> {
    cmd.clone().try_get_matches_from(argv).map_err(|e| match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            CliError::Help(e.render().to_string())
        }
        _ => usage(e),
    })
}

/// Clap parse with `--config` values merged underneath the command line.
pub fn parse(mut argv: Vec<OsString>) -> Result<Parsed, CliError> {
    let cmd = Cli::command();
    // lenient pass: required flags may come from the file
    if let Ok(first) = cmd.clone().ignore_errors(true).try_get_matches_from(&argv) {
        if let Some((name, m)) = first.subcommand() {
            if let Ok(Some(path)) = m.try_get_one::<PathBuf>("config") {
                let injected = config_tokens(find_sub(&cmd, name), m, path)?;
                let pos = argv.iter().position(|a| a == name).map_or(argv.len(), |p| p + 1);
                argv.splice(pos..pos, injected);
            }
        }
    }
    let matches = strict(&cmd, &argv)?;
    let cli = Cli::from_arg_matches(&matches).map_err(usage)?;
    let (name, m) = sub_matches(&matches);
    let resolved = resolved_listing(find_sub(&cmd, name), m);
    Ok(Parsed { cli, resolved })
}

/// File entries not shadowed by, or conflicting with, explicit flags.
fn config_tokens(sub: &Command, m: &ArgMatches, path: &PathBuf) -> Result<Vec<OsString>, CliError> {
    let name = sub.get_name();
    let explicit: Vec<&str> = sub
        .get_arguments()
        .map(|a| a.get_id().as_str())
        .filter(|id| m.value_source(id) == Some(ValueSource::CommandLine))
        .collect();
    let mut injected = Vec::new();
    for (key, value) in parse_config_file(path)? {
        if key == "config" {
            return Err(CliError::Usage(format!("{}: nested config files are not supported", path.display())));
        }
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| CliError::Usage(format!("{}: unknown key '{key}' for '{name}'", path.display())))?;
        let id = arg.get_id().as_str();
        let shadowed = explicit.contains(&id)
            || sub.get_arg_conflicts_with(arg).iter().any(|c| explicit.contains(&c.get_id().as_str()));
        if shadowed {
            continue;
        }
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" | "1" | "yes" => injected.push(format!("--{key}").into()),
                "false" | "0" | "no" => {}
                _ => return Err(CliError::Usage(format!("{}: '{key}' expects true or false", path.display()))),
            },
            _ => injected.push(format!("--{key}={value}").into()),
        }
    }
    Ok(injected)
}

/// Every argument of the subcommand in config-file syntax.
fn resolved_listing(sub: &Command, m: &ArgMatches) -> String {
    let mut out = format!("# uwchirp {}\n", sub.get_name());
    for arg in sub.get_arguments() {
        let Some(long) = arg.get_long() else { continue };
        if long == "config" || long == "help" || long == "version" {
            continue;
        }
        let id = arg.get_id().as_str();
        let value = match arg.get_action() {
            ArgAction::SetTrue => m.get_flag(id).to_string(),
            _ => match m.get_raw(id) {
                Some(vals) => vals.map(|v| v.to_string_lossy().into_owned()).collect::<Vec<_>>().join(","),
                None => continue,
            },
        };
        out.push_str(&format!("{long} = {value}\n"));
    }
    out
}
