//! `spc`: secure scanpath comparison from the command line.
//!
//! Exit codes: 0 success, 2 bad input or usage, 3 parameter mismatch,
//! 4 transport or protocol failure, 5 integrity failure (`BOTTOM` or an
//! authentication error), 6 client already authorized.

mod bench;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use scanpath_gc::boolcirc::comparison::Similarity;
use scanpath_gc::crypto::KeyPair;
use scanpath_gc::payload::{self, AlgorithmParams};
use scanpath_gc::plaintext;
use scanpath_gc::scanpath::{self, Scanpath};
use scanpath_gc::server::{self, RecordStore, SessionOutcome, Vault};
use scanpath_gc::session;
use scanpath_gc::transport::{self, Channel, NetProfile};
use scanpath_gc::{Error, Result};
use x25519_dalek::PublicKey;

use output::{Format, Report};

#[derive(Parser)]
#[command(name = "spc", version, about = "Secure two-party scanpath comparison over garbled circuits")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Turn a fixation CSV into a payload file.
    Preprocess(PreprocessArgs),
    /// Run one side of a direct two-party comparison, or compare two payloads in the clear.
    Compare(CompareArgs),
    /// Generate a client key pair.
    Keygen(KeygenArgs),
    /// Encrypt a payload and add it to a record store (owner).
    Store(StoreArgs),
    /// Authorize another client for a stored record (owner).
    Authorize(AuthorizeArgs),
    /// Serve sessions over a record store (server).
    Serve(ServeArgs),
    /// Compare against a stored record through the server (client).
    Evaluate(EvaluateArgs),
    /// Measure gates, bytes and time over a size sweep.
    Bench(bench::BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoName {
    Scanmatch,
    Multimatch,
    Subsmatch,
}

#[derive(Args, Clone)]
struct AlgoArgs {
    #[arg(long, value_enum)]
    algo: AlgoName,
    /// Grid size G of the G x G symbol grid.
    #[arg(long, default_value_t = 9)]
    grid: u32,
    /// Number of duration bins per grid cell.
    #[arg(long, default_value_t = 1)]
    bins: u32,
    /// SubsMatch alphabet size A.
    #[arg(long, default_value_t = 10)]
    alphabet: u32,
    /// SubsMatch n-gram length.
    #[arg(long, default_value_t = 3)]
    ngram: u32,
}

impl AlgoArgs {
    fn params(&self) -> Result<AlgorithmParams> {
        let p = match self.algo {
            AlgoName::Scanmatch => AlgorithmParams::scanmatch(self.grid, self.bins),
            AlgoName::Multimatch => AlgorithmParams::MultiMatch,
            AlgoName::Subsmatch => AlgorithmParams::subsmatch(self.alphabet, self.ngram),
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Args, Clone)]
struct NetArgs {
    /// Network profile; defaults to $SPC_NET_PROFILE, then lan.
    #[arg(long, value_parser = ["lan", "wan1", "wan2"])]
    profile: Option<String>,
    /// Seconds to keep retrying a connection.
    #[arg(long, default_value_t = 10)]
    timeout: u64,
}

impl NetArgs {
    fn profile(&self) -> Result<NetProfile> {
        match &self.profile {
            Some(p) => NetProfile::by_name(p),
            None => NetProfile::from_env(),
        }
    }
}

#[derive(Args)]
struct PreprocessArgs {
    #[command(flatten)]
    algo: AlgoArgs,
    /// CSV with header t_ms,x,y,dur_ms.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Keep MultiMatch saccades as extracted.
    #[arg(long)]
    no_simplify: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CompareRole {
    Garbler,
    Evaluator,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    algo: AlgoArgs,
    #[arg(long, value_enum, required_unless_present = "plaintext")]
    role: Option<CompareRole>,
    #[arg(long)]
    payload: PathBuf,
    /// Address to accept the peer on.
    #[arg(long, conflicts_with = "connect")]
    listen: Option<String>,
    /// Address of the peer.
    #[arg(long)]
    connect: Option<String>,
    /// Compare `--payload` and `--other` in the clear.
    #[arg(long, requires = "other")]
    plaintext: bool,
    #[arg(long)]
    other: Option<PathBuf>,
    #[command(flatten)]
    net: NetArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct KeygenArgs {
    /// Secret key file; the public key goes to `<out>.pub`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct VaultArgs {
    /// Owner vault holding the material needed to authorize clients later.
    #[arg(long)]
    vault: PathBuf,
    #[arg(long, env = "SPC_VAULT_PASSPHRASE", hide_env_values = true)]
    passphrase: String,
}

#[derive(Args)]
struct StoreArgs {
    #[command(flatten)]
    algo: AlgoArgs,
    #[arg(long)]
    payload: PathBuf,
    /// Record store directory.
    #[arg(long)]
    store: PathBuf,
    #[command(flatten)]
    vault: VaultArgs,
    /// `ID=PUBKEY_FILE`; may be repeated.
    #[arg(long = "client")]
    clients: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct AuthorizeArgs {
    #[arg(long)]
    store: PathBuf,
    #[command(flatten)]
    vault: VaultArgs,
    #[arg(long)]
    record: String,
    /// `ID=PUBKEY_FILE`.
    #[arg(long)]
    client: String,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    listen: String,
    /// Number of sessions to serve before exiting; 0 serves forever.
    #[arg(long, default_value_t = 1)]
    sessions: u64,
    #[command(flatten)]
    net: NetArgs,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    algo: AlgoArgs,
    #[arg(long)]
    connect: String,
    #[arg(long)]
    record: String,
    #[arg(long)]
    client_id: String,
    /// Client secret key file from `spc keygen`.
    #[arg(long)]
    key: PathBuf,
    #[arg(long)]
    payload: PathBuf,
    #[command(flatten)]
    net: NetArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

/// Result of a command that may still need a nonzero exit.
enum Done {
    Ok,
    Bottom,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::Preprocess(a) => preprocess(a),
        Cmd::Compare(a) => compare(a),
        Cmd::Keygen(a) => keygen(a),
        Cmd::Store(a) => store(a),
        Cmd::Authorize(a) => authorize(a),
        Cmd::Serve(a) => serve(a),
        Cmd::Evaluate(a) => evaluate(a),
        Cmd::Bench(a) => bench::run(a).map(|_| Done::Ok),
    };
    match r {
        Ok(Done::Ok) => ExitCode::SUCCESS,
        Ok(Done::Bottom) => ExitCode::from(5),
        Err(e) => {
            eprintln!("spc: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidInput(_) | Error::Range(_) | Error::Io(_) => 2,
        Error::ParamsMismatch(_) => 3,
        Error::Transport(_) | Error::Protocol(_) => 4,
        Error::Auth(_) => 5,
        Error::AlreadyAuthorized(_) => 6,
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

fn seed_or_random(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random)
}

fn preprocess(a: PreprocessArgs) -> Result<Done> {
    let params = a.algo.params()?;
    let sp = Scanpath::from_csv(fs::File::open(&a.input).map_err(|e| Error::invalid(format!("{}: {e}", a.input.display())))?)?;
    let (elements, bytes) = match &params {
        AlgorithmParams::ScanMatch { grid, bins, .. } => {
            let seq = scanpath::symbolize(&sp, *grid, *bins)?;
            (seq.len(), payload::encode_scanmatch(&seq)?)
        }
        AlgorithmParams::MultiMatch => {
            let mut ss = scanpath::extract_saccades(&sp)?;
            if !a.no_simplify {
                ss = scanpath::simplify(&ss, scanpath::DEFAULT_AMP_THRESHOLD, scanpath::DEFAULT_DIR_THRESHOLD);
            }
            (ss.len(), payload::encode_multimatch(&ss))
        }
        AlgorithmParams::SubsMatch { alphabet, ngram } => {
            let seq = scanpath::symbolize(&sp, a.algo.grid, a.algo.bins)?;
            let fv = scanpath::ngram_frequencies(&seq, *alphabet, *ngram)?;
            (fv.dim(), payload::encode_subsmatch(&fv))
        }
    };
    fs::write(&a.output, &bytes)?;
    println!("algorithm: {}", params.algorithm().name());
    println!("elements: {elements}");
    println!("bytes: {}", bytes.len());
    Ok(Done::Ok)
}

/// Cleartext similarity of two payloads, as the circuits would reveal it.
fn plaintext_similarity(params: &AlgorithmParams, a: &[u8], b: &[u8]) -> Result<Similarity> {
    params.check_payload(a)?;
    params.check_payload(b)?;
    Ok(match params {
        AlgorithmParams::ScanMatch { grid, bins, .. } => {
            let m = params.matrix()?;
            let (sa, sb) = (payload::decode_scanmatch(a, *grid, *bins)?, payload::decode_scanmatch(b, *grid, *bins)?);
            let raw = plaintext::scanmatch_raw(&sa, &sb, &m)?;
            Similarity::ScanMatch { raw, score: plaintext::normalize_scanmatch(raw, m.max_score(), sa.len(), sb.len()) }
        }
        AlgorithmParams::MultiMatch => {
            Similarity::MultiMatch(plaintext::multimatch(&payload::decode_multimatch(a)?, &payload::decode_multimatch(b)?)?)
        }
        AlgorithmParams::SubsMatch { .. } => {
            Similarity::SubsMatch(plaintext::subsmatch_values(&payload::decode_subsmatch(a), &payload::decode_subsmatch(b))?)
        }
    })
}

fn open_channel(listen: Option<&str>, connect: Option<&str>, net: &NetArgs) -> Result<Channel> {
    let profile = net.profile()?;
    match (listen, connect) {
        (Some(addr), None) => {
            let l = transport::listen(addr)?;
            eprintln!("listening on {}", l.local_addr()?);
            transport::accept(&l, profile)
        }
        (None, Some(addr)) => transport::connect(addr, profile, Duration::from_secs(net.timeout)),
        _ => Err(Error::invalid("give exactly one of --listen and --connect")),
    }
}

fn compare(a: CompareArgs) -> Result<Done> {
    let params = a.algo.params()?;
    let mine = read(&a.payload)?;
    if a.plaintext {
        let other = read(a.other.as_deref().expect("clap enforces --other"))?;
        let sim = plaintext_similarity(&params, &mine, &other)?;
        let mut r = Report::new();
        r.similarity(&sim);
        r.text("mode", "plaintext");
        r.emit(a.format);
        return Ok(Done::Ok);
    }
    params.check_payload(&mine)?;
    let seed = seed_or_random(a.seed);
    let mut ch = open_channel(a.listen.as_deref(), a.connect.as_deref(), &a.net)?;
    let rep = match a.role.expect("clap enforces --role") {
        CompareRole::Garbler => session::compare_as_garbler(&mut ch, &params, &mine, seed)?,
        CompareRole::Evaluator => session::compare_as_evaluator(&mut ch, &params, &mine, seed)?,
    };
    let mut r = Report::new();
    r.similarity(&rep.similarity);
    r.metrics(&rep.metrics);
    r.num("and_gates", rep.and_gates);
    r.num("table_bytes", rep.table_bytes);
    r.num("seed", rep.seed);
    r.emit(a.format);
    Ok(Done::Ok)
}

fn rng_for(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    }
}

fn pub_path(secret: &Path) -> PathBuf {
    let mut s = secret.as_os_str().to_owned();
    s.push(".pub");
    PathBuf::from(s)
}

fn keygen(a: KeygenArgs) -> Result<Done> {
    let kp = KeyPair::generate(&mut rng_for(a.seed));
    fs::write(&a.out, format!("{}\n", hex::encode(kp.secret.to_bytes())))?;
    fs::write(pub_path(&a.out), format!("{}\n", hex::encode(kp.public.to_bytes())))?;
    println!("{}", hex::encode(kp.public.to_bytes()));
    Ok(Done::Ok)
}

fn read_key32(path: &Path) -> Result<[u8; 32]> {
    let text = String::from_utf8(read(path)?).map_err(|_| Error::invalid(format!("{}: not text", path.display())))?;
    hex::decode(text.trim())
        .ok()
        .and_then(|v| v.try_into().ok())
        .ok_or_else(|| Error::invalid(format!("{}: expected 64 hex digits", path.display())))
}

fn parse_client(spec: &str) -> Result<(String, PublicKey)> {
    let (id, file) = spec.split_once('=').ok_or_else(|| Error::invalid(format!("--client {spec:?} is not ID=PUBKEY_FILE")))?;
    server::record::check_client_id(id)?;
    Ok((id.to_string(), PublicKey::from(read_key32(Path::new(file))?)))
}

fn open_vault(v: &VaultArgs, rng: &mut ChaCha20Rng) -> Result<Vault> {
    if v.vault.exists() {
        Vault::open(&read(&v.vault)?, &v.passphrase)
    } else {
        Ok(Vault::create(&v.passphrase, rng))
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn store(a: StoreArgs) -> Result<Done> {
    let params = a.algo.params()?;
    let data = read(&a.payload)?;
    let clients = a.clients.iter().map(|c| parse_client(c)).collect::<Result<Vec<_>>>()?;
    let mut rng = rng_for(a.seed);
    let mut vault = open_vault(&a.vault, &mut rng)?;
    let store = RecordStore::open(&a.store)?;
    let up = server::owner_encrypt_and_upload(&data, &params, &clients, &mut rng)?;
    vault.insert(&up.escrow, &mut rng)?;
    write_atomic(&a.vault.vault, &vault.to_bytes())?;
    store.put(&up.record)?;
    println!("{}", up.record.id());
    Ok(Done::Ok)
}

fn authorize(a: AuthorizeArgs) -> Result<Done> {
    let (id, pk) = parse_client(&a.client)?;
    let mut rng = rng_for(a.seed);
    let vault = Vault::open(&read(&a.vault.vault)?, &a.vault.passphrase)?;
    let escrow = vault.get(&a.record)?;
    let store = RecordStore::open(&a.store)?;
    store.update(&a.record, |rec| server::authorize_client(rec, &escrow, &id, &pk, &mut rng))?;
    println!("authorized {id} for {}", a.record);
    Ok(Done::Ok)
}

fn serve(a: ServeArgs) -> Result<Done> {
    let store = RecordStore::open(&a.store)?;
    let profile = a.net.profile()?;
    let listener = transport::listen(&a.listen)?;
    eprintln!("listening on {}", listener.local_addr()?);
    let base = seed_or_random(a.seed);
    let mut served = 0u64;
    while a.sessions == 0 || served < a.sessions {
        let seed = base.wrapping_add(served);
        served += 1;
        let mut ch = match transport::accept(&listener, profile.clone()) {
            Ok(ch) => ch,
            Err(e) => {
                eprintln!("spc: {e}");
                continue;
            }
        };
        match server::serve_session(&mut ch, &store, seed) {
            Ok(r) => eprintln!(
                "served record {} for {}: {} AND gates, {} bytes sent",
                r.record_id, r.client_id, r.and_gates, r.metrics.bytes_sent
            ),
            Err(e) => eprintln!("spc: session failed: {e}"),
        }
    }
    Ok(Done::Ok)
}

fn evaluate(a: EvaluateArgs) -> Result<Done> {
    let params = a.algo.params()?;
    let mine = read(&a.payload)?;
    params.check_payload(&mine)?;
    let sk = x25519_dalek::StaticSecret::from(read_key32(&a.key)?);
    let seed = seed_or_random(a.seed);
    let mut ch = open_channel(None, Some(&a.connect), &a.net)?;
    let rep = server::client_session(&mut ch, &a.record, &a.client_id, &sk, &params, &mine, seed)?;
    let mut r = Report::new();
    let done = match &rep.outcome {
        SessionOutcome::Scores(s) => {
            r.similarity(s);
            Done::Ok
        }
        SessionOutcome::Bottom => {
            r.text("result", "BOTTOM");
            Done::Bottom
        }
    };
    r.metrics(&rep.metrics);
    r.num("and_gates", rep.and_gates);
    r.num("seed", rep.seed);
    r.emit(a.format);
    Ok(done)
}
