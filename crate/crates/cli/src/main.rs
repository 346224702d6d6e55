use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hevf_cli::files::{self, load_keys, load_matrix, parse_vectors, save_keys};
use hevf_cli::{exit_code, CliError, Config};
use hevf_core::ckks::{CkksContext, ParameterSet, Preset};
use hevf_core::linalg::MatvecMode;
use hevf_core::ring::rng_from_seed;
use hevf_core::score::{NewtonConfig, ScoreCircuitPlan};
use hevf_eval::{
    attack_patterned, attack_random, bench, bench_table, compute_eer, run_trials, CorpusSpec, EvalReport, Scorer,
    SyntheticCorpus,
};
use hevf_protocol::{
    rotation_steps, Client, Connection, EnrollmentStore, Message, Server, ServerConfig, VerificationResponse,
};

#[derive(Parser)]
#[command(name = "hevf", version, about = "Speaker verification scored under CKKS encryption")]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Opts {
    /// TOML file with defaults for the flags below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// set1, set2 or set3.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Explicit chain, e.g. 8192:41,34,34,34,34,41.
    #[arg(long, global = true)]
    chain: Option<String>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Newton iterations (1 or 2).
    #[arg(long, global = true)]
    iterations: Option<usize>,
    #[arg(long, global = true)]
    x0: Option<f64>,
    /// Accept when the score is at least this.
    #[arg(long, global = true)]
    theta: Option<f64>,
    /// Enrollment store directory (HEVF_STORE takes precedence).
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Square matrix, delimited text or binary; identity if absent.
    #[arg(long = "q-matrix", global = true)]
    q_matrix: Option<PathBuf>,
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Random if absent; the chosen seed is printed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Mode::File)]
    mode: Mode,
    #[arg(long, global = true, value_name = "HOST:PORT")]
    listen: Option<String>,
    #[arg(long, global = true, value_name = "HOST:PORT")]
    connect: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// The server side runs in-process against the store directory.
    File,
    /// Requests go to a running `hevf serve`.
    Socket,
}

#[derive(Args)]
struct VectorInput {
    /// Vectors, one per line.
    #[arg(long)]
    vector: Option<PathBuf>,
    /// Take the vector from the corpus: the speaker's enrollment, or one of
    /// their test utterances with --utterance.
    #[arg(long)]
    speaker: Option<usize>,
    #[arg(long)]
    utterance: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a client key directory (written to --out).
    Keygen,
    /// Encrypt an enrollment and store it server-side.
    Enroll {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        user: String,
        #[command(flatten)]
        input: VectorInput,
    },
    /// Encrypt a probe, have the server score it and save the response.
    Verify {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        user: String,
        #[command(flatten)]
        input: VectorInput,
    },
    /// Decrypt a verification response and compare against --theta.
    Decide {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        response: PathBuf,
    },
    /// Serve enroll/verify requests on --listen.
    Serve {
        /// Stop after this many connections.
        #[arg(long)]
        max_connections: Option<usize>,
    },
    /// Time keygen, enrollment, verification and decryption.
    Bench {
        #[arg(long, default_value_t = 3)]
        reps: usize,
    },
    /// Error rates of several scorers on one corpus.
    EvalEer {
        /// baseline, approx1, approx2, enc-set1, enc-set2, enc-set3.
        #[arg(long, value_delimiter = ',', default_value = "baseline,approx2,approx1")]
        scorers: Vec<String>,
        #[arg(long, default_value_t = 151)]
        speakers: usize,
        /// Also run the all-ones and random-vector attacks at the baseline EER threshold.
        #[arg(long)]
        attacks: bool,
    },
    /// Print the level-by-level plan of the score circuit.
    Plan,
    /// Write a synthetic corpus to --out.
    GenCorpus {
        #[arg(long, default_value_t = 151)]
        speakers: usize,
        #[arg(long, default_value_t = 2)]
        tests: usize,
        /// Delimited text instead of the binary container.
        #[arg(long)]
        text: bool,
    },
    /// Print (or write to --out) the effective configuration.
    EmitConfig,
}

impl Opts {
    fn config(&self) -> Result<Config> {
        let file = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        let flags = Config {
            preset: self.preset.clone(),
            chain: self.chain.clone(),
            dim: self.dim,
            iterations: self.iterations,
            x0: self.x0,
            theta: self.theta,
            store: self.store.clone(),
            q_matrix: self.q_matrix.clone(),
            corpus: self.corpus.clone(),
            seed: self.seed,
        };
        Ok(file.merge(flags))
    }

    fn out(&self) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| CliError::Param("--out is required".into()).into())
    }

    fn connect(&self) -> Result<Connection> {
        let addr = self.connect.as_deref().ok_or_else(|| CliError::Param("--connect is required in socket mode".into()))?;
        Ok(Connection::connect(addr)?)
    }
}

fn seed(cfg: &Config) -> u64 {
    cfg.seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s}");
        s
    })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn load_corpus(cfg: &Config) -> Result<SyntheticCorpus> {
    let path = cfg.corpus.as_deref().ok_or_else(|| CliError::Param("--corpus is required with --speaker".into()))?;
    Ok(SyntheticCorpus::from_file_bytes(&files::read(path)?).with_context(|| format!("reading {}", path.display()))?)
}

/// Vectors from --vector, or one vector from the corpus.
fn input_vectors(cfg: &Config, input: &VectorInput, probe: bool) -> Result<Vec<Vec<f64>>> {
    match (&input.vector, input.speaker) {
        (Some(path), None) => {
            let text = String::from_utf8(files::read(path)?).map_err(|_| CliError::Param("vector file is not UTF-8".into()))?;
            Ok(parse_vectors(&text)?)
        }
        (None, Some(s)) => {
            let corpus = load_corpus(cfg)?;
            if s >= corpus.speakers() {
                bail!(CliError::Param(format!("speaker {s} out of range (corpus has {})", corpus.speakers())));
            }
            match (probe, input.utterance) {
                (true, j) => {
                    let j = j.unwrap_or(0);
                    let v = corpus.tests[s].get(j).ok_or_else(|| CliError::Param(format!("utterance {j} out of range")))?;
                    Ok(vec![v.clone()])
                }
                (false, None) => Ok(vec![corpus.enroll[s].clone()]),
                (false, Some(_)) => bail!(CliError::Param("--utterance only applies to verify".into())),
            }
        }
        _ => bail!(CliError::Param("give exactly one of --vector or --speaker".into())),
    }
}

/// Parameters and iteration count for the in-process server. Without an
/// explicit preset or chain the client's parameters are used.
fn server_plan(cfg: &Config, client_params: &ParameterSet) -> Result<(ParameterSet, usize)> {
    if cfg.preset.is_some() || cfg.chain.is_some() {
        return Ok(cfg.checked_plan()?);
    }
    let it = match cfg.iterations {
        Some(it) => it,
        None => client_params.name.parse::<Preset>().map(|p| p.iterations()).unwrap_or(1),
    };
    ScoreCircuitPlan::new(it)?.check_params(client_params)?;
    Ok((client_params.clone(), it))
}

fn local_server(cfg: &Config, client: &Client) -> Result<Server> {
    let (params, iterations) = server_plan(cfg, client.context().params())?;
    let ctx = files::context(params)?;
    let q = load_matrix(cfg.q_matrix.as_deref(), client.layout().dim)?;
    let store = EnrollmentStore::open(cfg.store()?)?;
    let config = ServerConfig { iterations, mode: MatvecMode::BabyGiant };
    Ok(Server::new(ctx, q, store, config)?)
}

fn check_dims(client: &Client, vs: &[Vec<f64>]) -> Result<()> {
    let d = client.layout().dim;
    if let Some(v) = vs.iter().find(|v| v.len() != d) {
        bail!(CliError::Param(format!("vector of dimension {} for keys generated at dimension {d}", v.len())));
    }
    if vs.len() > client.layout().blocks {
        bail!(CliError::Param(format!("{} vectors but one ciphertext holds {}", vs.len(), client.layout().blocks)));
    }
    Ok(())
}

fn cmd_keygen(opts: &Opts, cfg: &Config) -> Result<()> {
    let out = opts.out()?;
    let ctx = files::context(cfg.params()?)?;
    let dim = cfg.dim();
    let mut rng = rng_from_seed(seed(cfg));
    let client = Client::generate(ctx.clone(), dim, MatvecMode::BabyGiant, &mut rng)?;
    save_keys(out, &client)?;
    println!(
        "keys for {} at d={dim}: {} rotation keys, written to {}",
        ctx.params(),
        client.keys().galois.len(),
        out.display()
    );
    Ok(())
}

fn cmd_enroll(opts: &Opts, cfg: &Config, keys: &Path, user: &str, input: &VectorInput) -> Result<()> {
    let client = load_keys(keys)?;
    let vs = input_vectors(cfg, input, false)?;
    check_dims(&client, &vs)?;
    let refs: Vec<&[f64]> = vs.iter().map(Vec::as_slice).collect();
    let mut rng = rng_from_seed(seed(cfg));
    let req = client.enrollment(user, &refs, cfg.x0(), &mut rng)?;
    let ctx = client.context();
    if let Some(out) = &opts.out {
        files::write(out, &req.to_bytes(ctx))?;
    }
    let ack = match opts.mode {
        Mode::File => local_server(cfg, &client)?.enroll_bytes(&req.to_bytes(ctx))?,
        Mode::Socket => match opts.connect()?.request(ctx, &Message::Enroll(Box::new(req)))? {
            Message::Ack(ack) => ack,
            other => bail!(CliError::Protocol(format!("expected an acknowledgement, got {:?}", other.kind()))),
        },
    };
    println!("enrolled {} ({} vector(s)), record {}", ack.user_id, vs.len(), hex(&ack.record_digest));
    Ok(())
}

fn cmd_verify(opts: &Opts, cfg: &Config, keys: &Path, user: &str, input: &VectorInput) -> Result<()> {
    let out = opts.out()?;
    let client = load_keys(keys)?;
    let vs = input_vectors(cfg, input, true)?;
    check_dims(&client, &vs)?;
    let refs: Vec<&[f64]> = vs.iter().map(Vec::as_slice).collect();
    let mut rng = rng_from_seed(seed(cfg));
    let req = client.verification(user, &refs, &mut rng)?;
    let ctx = client.context();
    let resp = match opts.mode {
        Mode::File => local_server(cfg, &client)?.verify(&req)?,
        Mode::Socket => match opts.connect()?.request(ctx, &Message::Verify(req))? {
            Message::Response(resp) => resp,
            other => bail!(CliError::Protocol(format!("expected a verification response, got {:?}", other.kind()))),
        },
    };
    files::write(out, &resp.to_bytes(ctx))?;
    print!("{}", resp.plan_report);
    println!("response for {} ({} score(s)) written to {}", resp.user_id, resp.count, out.display());
    Ok(())
}

fn cmd_decide(cfg: &Config, keys: &Path, response: &Path) -> Result<()> {
    let theta = cfg.theta.ok_or_else(|| CliError::Param("--theta is required".into()))?;
    let client = load_keys(keys)?;
    let resp = VerificationResponse::from_bytes(client.context(), &files::read(response)?)?;
    for (k, d) in client.decide(&resp, theta)?.iter().enumerate() {
        println!("{} #{k}: score {:.6} {}", resp.user_id, d.score, if d.accept { "accept" } else { "reject" });
    }
    Ok(())
}

fn cmd_serve(opts: &Opts, cfg: &Config, max_connections: Option<usize>) -> Result<()> {
    let addr = opts.listen.as_deref().ok_or_else(|| CliError::Param("--listen is required".into()))?;
    let (params, iterations) = cfg.checked_plan()?;
    let ctx = files::context(params)?;
    let dim = cfg.dim();
    let q = load_matrix(cfg.q_matrix.as_deref(), dim)?;
    let store = EnrollmentStore::open(cfg.store()?)?;
    let server = Server::new(ctx.clone(), q, store, ServerConfig { iterations, mode: MatvecMode::BabyGiant })?;
    let listener = TcpListener::bind(addr).map_err(|e| CliError::Io(format!("binding {addr}: {e}")))?;
    println!("listening on {} ({}, d={dim}, {iterations} iteration(s))", listener.local_addr()?, ctx.params().name);
    Ok(server.serve(&listener, max_connections)?)
}

fn cmd_bench(opts: &Opts, cfg: &Config, reps: usize) -> Result<()> {
    let (params, iterations) = cfg.checked_plan()?;
    let dim = cfg.dim();
    let q = load_matrix(cfg.q_matrix.as_deref(), dim)?;
    let row = bench(&params, &q, iterations, cfg.x0(), reps, seed(cfg))?;
    print!("{}", bench_table(std::slice::from_ref(&row)));
    if let Some(out) = &opts.out {
        files::write(out, serde_json::to_string_pretty(&row)?.as_bytes())?;
    }
    Ok(())
}

fn scorer(name: &str, cfg: &Config, seed: u64) -> Result<Scorer> {
    let x0 = cfg.x0();
    let newton = |it| NewtonConfig::new(x0, it).map_err(CliError::from);
    Ok(match name.trim() {
        "baseline" => Scorer::Baseline,
        "approx1" => Scorer::Approx(newton(1)?),
        "approx2" => Scorer::Approx(newton(2)?),
        other => match other.strip_prefix("enc-") {
            Some(p) => {
                let preset: Preset = p.parse()?;
                Scorer::Encrypted {
                    params: preset.params(),
                    newton: newton(cfg.iterations.unwrap_or(preset.iterations()))?,
                    mode: MatvecMode::BabyGiant,
                    seed,
                }
            }
            None => bail!(CliError::Param(format!("unknown scorer '{other}'"))),
        },
    })
}

#[derive(serde::Serialize)]
struct AttackSummary {
    theta: f64,
    imposter_far: f64,
    all_ones_far: f64,
    random_far: f64,
}

#[derive(serde::Serialize)]
struct EerDocument {
    seed: u64,
    reports: Vec<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    attacks: Option<AttackSummary>,
}

fn cmd_eval_eer(opts: &Opts, cfg: &Config, names: &[String], speakers: usize, attacks: bool) -> Result<()> {
    let seed = seed(cfg);
    let corpus = match &cfg.corpus {
        Some(_) => load_corpus(cfg)?,
        None => SyntheticCorpus::generate(&CorpusSpec { speakers, ..CorpusSpec::new(cfg.dim()) }, seed)?,
    };
    let q = load_matrix(cfg.q_matrix.as_deref(), corpus.dim)?;
    let scorers = names.iter().map(|n| scorer(n, cfg, seed)).collect::<Result<Vec<_>>>()?;
    let mut reports = Vec::new();
    for s in &scorers {
        let t = run_trials(&corpus, &q, s)?;
        let r = compute_eer(&t.genuine, &t.imposter)?.with_label(s.label());
        print!("{}", r.to_table(11));
        reports.push(r);
    }
    println!("summary:");
    for r in &reports {
        println!("  {:<24} EER {:.3}%", r.label, r.eer * 100.0);
    }
    let attacks = if attacks {
        let t = run_trials(&corpus, &q, &Scorer::Baseline)?;
        let r = compute_eer(&t.genuine, &t.imposter)?;
        let theta = r.eer_threshold;
        let ones = attack_patterned(&corpus, &q, &Scorer::Baseline, theta, seed)?;
        let random = attack_random(&corpus, &q, &Scorer::Baseline, theta, seed)?;
        let summary = AttackSummary {
            theta,
            imposter_far: hevf_eval::acceptance_rate(&t.imposter, theta),
            all_ones_far: ones.far,
            random_far: random.far,
        };
        println!(
            "attacks at θ={theta:.4}: imposter FAR {:.3}%, all-ones FAR {:.3}%, random FAR {:.3}%",
            summary.imposter_far * 100.0,
            summary.all_ones_far * 100.0,
            summary.random_far * 100.0
        );
        Some(summary)
    } else {
        None
    };
    if let Some(out) = &opts.out {
        let doc = EerDocument { seed, reports, attacks };
        files::write(out, serde_json::to_string_pretty(&doc)?.as_bytes())?;
    }
    Ok(())
}

fn cmd_plan(cfg: &Config) -> Result<()> {
    let (params, iterations) = cfg.checked_plan()?;
    let plan = ScoreCircuitPlan::new(iterations)?;
    println!("{params}");
    print!("{}", plan.report(params.levels()));
    if cfg.dim.is_some() {
        let ctx = CkksContext::new(params)?;
        let steps = rotation_steps(&ctx, cfg.dim(), MatvecMode::BabyGiant)?;
        println!("rotation keys for d={}: {} {:?}", cfg.dim(), steps.len(), steps);
    }
    Ok(())
}

fn cmd_gen_corpus(opts: &Opts, cfg: &Config, speakers: usize, tests: usize, text: bool) -> Result<()> {
    let out = opts.out()?;
    let spec = CorpusSpec { speakers, tests, ..CorpusSpec::new(cfg.dim()) };
    let corpus = SyntheticCorpus::generate(&spec, seed(cfg))?;
    let bytes = if text { corpus.to_text().into_bytes() } else { corpus.to_binary() };
    files::write(out, &bytes)?;
    println!("{speakers} speakers × {tests} tests at d={} written to {}", spec.dim, out.display());
    Ok(())
}

fn cmd_emit_config(opts: &Opts, cfg: &Config) -> Result<()> {
    let text = cfg.to_toml();
    match &opts.out {
        Some(out) => files::write(out, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let opts = &cli.opts;
    let cfg = opts.config()?;
    match &cli.cmd {
        Cmd::Keygen => cmd_keygen(opts, &cfg),
        Cmd::Enroll { keys, user, input } => cmd_enroll(opts, &cfg, keys, user, input),
        Cmd::Verify { keys, user, input } => cmd_verify(opts, &cfg, keys, user, input),
        Cmd::Decide { keys, response } => cmd_decide(&cfg, keys, response),
        Cmd::Serve { max_connections } => cmd_serve(opts, &cfg, *max_connections),
        Cmd::Bench { reps } => cmd_bench(opts, &cfg, *reps),
        Cmd::EvalEer { scorers, speakers, attacks } => cmd_eval_eer(opts, &cfg, scorers, *speakers, *attacks),
        Cmd::Plan => cmd_plan(&cfg),
        Cmd::GenCorpus { speakers, tests, text } => cmd_gen_corpus(opts, &cfg, *speakers, *tests, *text),
        Cmd::EmitConfig => cmd_emit_config(opts, &cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
