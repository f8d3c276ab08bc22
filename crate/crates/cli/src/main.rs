use clap::{Parser, Subcommand, ValueEnum};
use qfhe_lab::acceptance::{chain_over_network, corrupted_accept_detected, dense_path_run, run_all, run_criterion};
use qfhe_lab::branching_program::{bp_from_ma_alice, bp_metrics, bp_to_dot, LayeredBp};
use qfhe_lab::garden_hose::{bob_symbols, gh_build, gh_flow, gh_wire_alice, gh_wire_bob, network_to_dot, PipeNetwork};
use qfhe_lab::lwe_he::{encrypt_with_mask, he_decrypt, he_phase, public_key_for, LweCiphertext, LweParams, SecretKey};
use qfhe_lab::ma_program::{compile_lwe_dec, Instruction, MaProgram};
use qfhe_lab::qfhe_scheme::{qfhe_decrypt, qfhe_encrypt, qfhe_eval, qfhe_keygen, random_circuit, Circuit, QfheParams};
use qfhe_lab::quantum_core::{apply2, Amp2, fidelity, fidelity2, fidelity_with_density, random_qubit, random_state, tomography_inputs, Gate};
use qfhe_lab::resource_estimator::{audit, builtin_tables, estimate, estimate_table, Extras, Scheme};
use qfhe_lab::tgate_gadget::{gadget_apply, gadget_gen, gadget_resolve};
use qfhe_lab::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::json;
use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

// stdout may be a closed pipe; output is best effort
macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout().lock(), $($t)*);
    }};
}

#[derive(Parser)]
#[command(name = "qfhe", version, about = "Garden-hose QFHE toolkit at desk scale")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lower a ciphertext's decryption to MA program, branching program and pipe network.
    Compile {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, default_value_t = Emit::Json)]
        emit: Emit,
        /// Write ma.json, bp.json/bp.dot and gh.json/gh.dot here instead of stdout.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Simulate one stage of the pipeline.
    Run {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        source: Source,
        /// Secret key bits for water mode, e.g. 1011.
        #[arg(long)]
        key: Option<String>,
        /// Data qubit for chain mode.
        #[arg(long, value_enum, default_value_t = Input::PlusI)]
        data: Input,
    },
    /// Encrypt a random state, evaluate a circuit file homomorphically and report fidelity.
    Eval {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        seed: u64,
    },
    /// Gadget-size estimate for a scheme.
    Estimate {
        #[arg(long)]
        scheme: String,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        q: u64,
        #[arg(long)]
        lambda: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Audit the built-in parameter and comparison tables.
    Audit {
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Run the acceptance criteria.
    Selftest {
        /// Only this criterion (1-11).
        #[arg(long)]
        only: Option<u8>,
    },
}

#[derive(clap::Args)]
struct Source {
    /// Built-in instance.
    #[arg(long, value_enum, conflicts_with = "input")]
    builtin: Option<Builtin>,
    /// Ciphertext JSON file.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Builtin {
    T1,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Json,
    Dot,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Water,
    Chain,
    Dense,
    QfheDemo,
}

#[derive(Clone, Copy, ValueEnum)]
enum Input {
    Zero,
    One,
    Plus,
    PlusI,
}

enum Failure {
    Assertion(String),
    Input(String),
    Resource(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_resource_limit() {
            Failure::Resource(e.to_string())
        } else if matches!(e, Error::Input(_) | Error::Parameter(_) | Error::Index(_) | Error::KeyLevel { .. }) {
            Failure::Input(e.to_string())
        } else {
            Failure::Assertion(e.to_string())
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

const T1_KEY: [u8; 4] = [1, 0, 1, 1];

fn t1_ciphertext() -> LweCiphertext {
    let sk = SecretKey { bits: T1_KEY.to_vec(), level: 0 };
    encrypt_with_mask(&sk, &LweParams::t1(), &[3, 5, 7, 11], 1, 1).expect("valid builtin")
}

fn load_ciphertext(source: &Source) -> std::result::Result<LweCiphertext, Failure> {
    match &source.input {
        None => Ok(t1_ciphertext()),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            let ct: LweCiphertext = serde_json::from_str(&text).map_err(|e| {
                Failure::Input(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
            })?;
            ct.params.validate()?;
            if ct.mask.len() != ct.params.n || ct.body >= ct.params.q || ct.mask.iter().any(|&m| m >= ct.params.q) {
                return Err(Failure::Input("ciphertext does not match its parameters".into()));
            }
            Ok(ct)
        }
    }
}

fn parse_key(key: Option<&str>, n: usize, from_input: bool) -> std::result::Result<Vec<u8>, Failure> {
    let Some(k) = key else {
        return if from_input {
            Err(Failure::Input("--key is required with --input".into()))
        } else {
            Ok(T1_KEY.to_vec())
        };
    };
    let bits: Vec<u8> = k
        .chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(Failure::Input(format!("key must be a bit string, got {k:?}"))),
        })
        .collect::<std::result::Result<_, _>>()?;
    if bits.len() != n {
        return Err(Failure::Input(format!("key has {} bits, dimension is {n}", bits.len())));
    }
    Ok(bits)
}

fn require_seed(seed: Option<u64>, mode: &str) -> std::result::Result<u64, Failure> {
    seed.ok_or_else(|| Failure::Input(format!("--seed is required for {mode}")))
}

fn print_json(v: &serde_json::Value) {
    outln!("{}", serde_json::to_string_pretty(v).expect("serialisable"));
}

struct Lowered {
    ma: MaProgram,
    bp: LayeredBp,
    net: PipeNetwork,
}

fn lower(ct: &LweCiphertext) -> std::result::Result<Lowered, Failure> {
    let ma = compile_lwe_dec(ct);
    let bp = bp_from_ma_alice(&ma)?;
    let net = gh_build(&bp)?;
    Ok(Lowered { ma, bp, net })
}

fn cmd_compile(source: &Source, emit: Emit, out_dir: Option<&PathBuf>) -> Outcome {
    let ct = load_ciphertext(source)?;
    let l = lower(&ct)?;
    let m = bp_metrics(&l.bp);
    let metrics = json!({
        "w": m.width_states,
        "w_bits": m.width_bits,
        "L": m.length,
        "m": l.net.pipe_count,
    });
    let write = |dir: &PathBuf, name: &str, body: String| -> Outcome {
        std::fs::write(dir.join(name), body).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))
    };
    match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
            write(dir, "ma.json", to_json(&l.ma))?;
            match emit {
                Emit::Json => {
                    write(dir, "bp.json", to_json(&l.bp))?;
                    write(dir, "gh.json", to_json(&l.net))?;
                }
                Emit::Dot => {
                    write(dir, "bp.dot", bp_to_dot(&l.bp))?;
                    write(dir, "gh.dot", network_to_dot(&l.net, None, None))?;
                }
            }
            print_json(&json!({ "metrics": metrics }));
        }
        None => match emit {
            Emit::Json => print_json(&json!({ "ma": l.ma, "bp": l.bp, "gh": l.net, "metrics": metrics })),
            Emit::Dot => {
                eprintln!("metrics: w = {}, L = {}, m = {}", m.width_states, m.length, l.net.pipe_count);
                out!("{}", network_to_dot(&l.net, None, None));
            }
        },
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serialisable") + "\n"
}

fn cmd_water(source: &Source, key: Option<&str>) -> Outcome {
    let ct = load_ciphertext(source)?;
    let bits = parse_key(key, ct.params.n, source.input.is_some())?;
    let l = lower(&ct)?;
    let alice = gh_wire_alice(&l.net, &bits)?;
    let bob = gh_wire_bob(&l.net, &bob_symbols(&l.bp)?)?;
    let w = gh_flow(&l.net, &alice, &bob)?;
    let sk = SecretKey { bits, level: ct.level };
    let dec = he_decrypt(&sk, &ct)?;
    print_json(&json!({
        "exit_state": w.exit_state,
        "output": w.output,
        "decrypt": dec,
        "pipes": w.pipes,
        "visited_ends": w.visited_ends.iter().map(|e| e.id()).collect::<Vec<_>>(),
        "traversed_decorations": w.traversed_decorations,
    }));
    if w.output != dec {
        return Err(Failure::Assertion("water output differs from decryption".into()));
    }
    Ok(())
}

fn data_of(input: Input) -> Amp2 {
    tomography_inputs()[input as usize]
}

fn cmd_chain(seed: u64, input: Input) -> Outcome {
    let ct = t1_ciphertext();
    let sk0 = SecretKey { bits: T1_KEY.to_vec(), level: 0 };
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let sk1 = SecretKey { bits: (0..4).map(|_| rng.gen_range(0..2u8)).collect(), level: 1 };
    let pk1 = public_key_for(&sk1, &LweParams::t1(), &mut rng);
    let pad1 = public_key_for(&sk1, &LweParams::working(4, 2), &mut rng);
    let key = gadget_gen(&sk0, &pk1, &pad1, rng.gen())?;
    let data = data_of(input);
    let out = gadget_apply(&key, data, &ct, rng.gen())?;
    let r = gadget_resolve(&sk1, &out)?;
    let a = he_decrypt(&sk0, &ct)?;
    let expect = if a == 1 { apply2(&Gate::Sdg.matrix().expect("single-qubit"), data) } else { data };
    let f = fidelity2(r.state, expect);
    print_json(&json!({
        "control_phase": he_phase(&sk0, &ct)?,
        "control_bit": a,
        "fired": out.fired,
        "exit_state": r.exit_state,
        "frame": { "x": r.new_pauli.x, "z": r.new_pauli.z },
        "path_length": out.data.transcript.len(),
        "resolved": r.state,
        "expected": expect,
        "fidelity": f,
    }));
    check_fidelity(f)
}

fn check_fidelity(f: f64) -> Outcome {
    if f >= 1.0 - 1e-9 {
        Ok(())
    } else {
        Err(Failure::Assertion(format!("fidelity {f} below 1 - 1e-9")))
    }
}

fn cmd_dense(seed: u64) -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (start, c, x) = (rng.gen_range(0..2u64), rng.gen_range(0..2u64), rng.gen_range(0..2u8));
    let prog = MaProgram {
        modulus: 2,
        start,
        instructions: vec![Instruction { var: 1, a: 0, b: c }],
        accept: BTreeSet::from([1]),
        arity: 1,
    };
    let bp = bp_from_ma_alice(&prog)?;
    let net = gh_build(&bp)?;
    let alice = gh_wire_alice(&net, &[x])?;
    let bob = gh_wire_bob(&net, &bob_symbols(&bp)?)?;
    let data = random_qubit(&mut rng);
    let (chain, trace, meas) = chain_over_network(&net, &alice, &bob, data, seed)?;
    let rho = dense_path_run(&net, &trace, &meas, &chain.transcript, data)?;
    let f = fidelity_with_density(chain.physical_state(), &rho);
    print_json(&json!({
        "program": prog,
        "x": x,
        "output": trace.output,
        "dense_qubits": 1 + 2 * trace.pipes.len(),
        "transcript": chain.transcript,
        "chain_physical": chain.physical_state(),
        "fidelity_chain_vs_dense": f,
    }));
    check_fidelity(f)
}

fn cmd_qfhe_demo(seed: u64) -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let keys = qfhe_keygen(&QfheParams::t1(2), rng.gen())?;
    let n = rng.gen_range(1..=3);
    let circuit = random_circuit(n, rng.gen_range(1..=12), 2, &mut rng);
    evaluate(&keys, &circuit, &mut rng)
}

fn evaluate(keys: &qfhe_lab::qfhe_scheme::QfheKeys, circuit: &Circuit, rng: &mut ChaCha20Rng) -> Outcome {
    let psi = random_state(circuit.qubit_count, rng)?;
    let ct = qfhe_encrypt(keys, &psi, rng.gen())?;
    let out = qfhe_eval(keys, circuit, &ct, rng.gen())?;
    let (plain, stats) = qfhe_decrypt(keys, &out)?;
    let f = fidelity(&plain, &circuit.simulate(&psi)?);
    print_json(&json!({
        "circuit": circuit,
        "t_depth": circuit.t_depth(),
        "level": out.level,
        "ciphertext_bytes": out.to_bytes().len(),
        "decrypt_ops": stats.ops,
        "fidelity": f,
    }));
    check_fidelity(f)
}

fn cmd_eval(path: &PathBuf, seed: u64) -> Outcome {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let circuit: Circuit = serde_json::from_str(&text)
        .map_err(|e| Failure::Input(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())))?;
    circuit.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let keys = qfhe_keygen(&QfheParams::t1(circuit.t_depth().max(1)), rng.gen())?;
    evaluate(&keys, &circuit, &mut rng)
}

fn cmd_estimate(scheme: &str, n: u64, q: u64, lambda: Option<u64>, format: Format) -> Outcome {
    let scheme: Scheme = scheme.parse()?;
    let e = estimate(scheme, n, q, Extras { lambda })?;
    match format {
        Format::Json => print_json(&serde_json::to_value(&e).expect("serialisable")),
        Format::Table => out!("{}", estimate_table(&e)),
    }
    Ok(())
}

fn cmd_audit(format: Format) -> Outcome {
    let t = builtin_tables();
    let lines = audit(&t.params);
    match format {
        Format::Json => {
            let factors: Vec<_> = t.comparison.iter().map(|r| json!({ "label": r.label, "factor": r.factor() })).collect();
            print_json(&json!({ "audit": lines, "factors": factors }));
        }
        Format::Table => {
            for l in &lines {
                outln!(
                    "{:<8} computed {:>8} claimed {:>8} ratio {}/{} = {:.1} {:?}",
                    l.label,
                    l.computed,
                    l.claimed,
                    l.ratio.0,
                    l.ratio.1,
                    l.ratio_f64(),
                    l.verdict
                );
            }
            for r in &t.comparison {
                let f = r.factor().map(|f| format!("2^{}", f.trailing_zeros())).unwrap_or_else(|| "-".into());
                outln!("{:<8} dss {:>14} ours {:>10} factor {f}", r.label, r.dss_epr, r.ours_epr);
            }
        }
    }
    Ok(())
}

fn cmd_selftest(only: Option<u8>) -> Outcome {
    let reports = match only {
        Some(id) if !(1..=11).contains(&id) => return Err(Failure::Input(format!("no criterion {id}"))),
        Some(id) => vec![run_criterion(id)],
        None => run_all(),
    };
    for r in &reports {
        outln!("{r}");
    }
    let control = corrupted_accept_detected()?;
    outln!("[{}] control: corrupted accept set detected by the decoration law", if control { "PASS" } else { "FAIL" });
    let failed: Vec<u8> = reports.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    outln!("{} of {} criteria passed", reports.len() - failed.len(), reports.len());
    if failed.is_empty() && control {
        Ok(())
    } else {
        Err(Failure::Assertion(format!("failed criteria: {failed:?}")))
    }
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Compile { source, emit, out_dir } => cmd_compile(&source, emit, out_dir.as_ref()),
        Command::Run { mode, seed, source, key, data } => match mode {
            Mode::Water => cmd_water(&source, key.as_deref()),
            Mode::Chain => cmd_chain(require_seed(seed, "chain")?, data),
            Mode::Dense => cmd_dense(require_seed(seed, "dense")?),
            Mode::QfheDemo => cmd_qfhe_demo(require_seed(seed, "qfhe-demo")?),
        },
        Command::Eval { circuit, seed } => cmd_eval(&circuit, seed),
        Command::Estimate { scheme, n, q, lambda, format } => cmd_estimate(&scheme, n, q, lambda, format),
        Command::Audit { format } => cmd_audit(format),
        Command::Selftest { only } => cmd_selftest(only),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Resource(m)) => {
            eprintln!("error: resource limit: {m}");
            ExitCode::from(3)
        }
    }
}
