mod report;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use report::{object, OutputFormat, Report, Rows};
use sensval::asymptotics::{
    kappa_law_asymptotic, kappa_law_finite, law_for, AltModel, AsymptoticLaw, SimSettings,
};
use sensval::design::{
    choose_score, critical_sample_size, critical_size_grid, split_minimum_sample, split_rates, SplitSpec,
    SubgroupSpec, Summary,
};
use sensval::numerics::Rng;
use sensval::scores::{score_vector, sigma_q_sq, PairDiffs, ScoreSpec};
use sensval::screening::{histogram_bins, load_matrix, load_pairs, qq_data, screen, InputFormat, ScreeningTable};
use sensval::senscore::{sensitivity_table, sensitivity_value, statistic, Method, Tail, DEFAULT_TOL};
use sensval::sim::{power_check, run_job, ustat_candidates, JobParams, SimJob};
use sensval::Error;

#[derive(Parser)]
#[command(name = "sensval", version, about = "Sensitivity values and sensitivity analysis for matched pairs")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format; defaults to json for single results and csv for tables.
    #[arg(long, global = true, value_enum)]
    output: Option<OutputFormat>,

    /// Write results to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for every stochastic computation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Sensitivity value of one matched-pair dataset.
    Value(ValueArgs),
    /// p-value bounds over a grid of gamma values.
    Table(TableArgs),
    /// Power of a sensitivity analysis, simulated and approximated.
    Power(PowerArgs),
    /// Design sensitivity and the law of kappa* for a score and alternative.
    DesignSensitivity(LawArgs),
    /// Rank candidate scores by predicted sensitivity value.
    ChooseScore(ChooseArgs),
    /// Critical sample size for pooling two subgroups.
    Samplesize(SampleSizeArgs),
    /// Screening sample size for a split-sample design.
    SplitDesign(SplitArgs),
    /// Sensitivity values for many outcomes.
    Screen(ScreenArgs),
    /// Q-Q or histogram data of screened sensitivity values.
    Qq(QqArgs),
    /// Run a registered simulation job.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV with a `y` column of pair differences, or raw `pair,z,r` records.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "wilcoxon")]
    score: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// approx, exact, mc or mc:<draws>.
    #[arg(long, default_value = "approx")]
    method: String,
}

#[derive(Args)]
struct ValueArgs {
    #[command(flatten)]
    data: DataArgs,
    /// greater, less or two-sided.
    #[arg(long, default_value = "greater")]
    tail: String,
    /// Search tolerance on the kappa scale.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Args)]
struct TableArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "two-sided")]
    tail: String,
    /// Comma-separated gamma values, each at least 1.
    #[arg(long, default_value = "1,2,3,5,7,10")]
    gammas: String,
}

#[derive(Args)]
struct AltArgs {
    /// normal:<shift>,<sd>, t:<dof>,<shift> or empirical:<path>.
    #[arg(long)]
    alt: String,
    #[arg(long, default_value = "wilcoxon")]
    score: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Args)]
struct PowerArgs {
    #[command(flatten)]
    alt: AltArgs,
    #[arg(long = "I")]
    n: usize,
    #[arg(long)]
    gamma: f64,
    /// Simulated datasets (at least 1000).
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
}

#[derive(Args)]
struct LawArgs {
    #[command(flatten)]
    alt: AltArgs,
    /// Sample size for the law of kappa*; `inf` for the limit.
    #[arg(long = "I")]
    n: Option<f64>,
}

#[derive(Args)]
struct ChooseArgs {
    /// normal:<shift>,<sd>, t:<dof>,<shift> or empirical:<path>.
    #[arg(long)]
    alt: String,
    #[arg(long = "I")]
    n: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Semicolon-separated candidate scores; defaults to ten U-statistics.
    #[arg(long)]
    scores: Option<String>,
    /// mean, median or quantile:<p>.
    #[arg(long, default_value = "median")]
    summary: String,
}

#[derive(Args)]
struct SampleSizeArgs {
    #[arg(long, required_unless_present = "grid")]
    mu1: Option<f64>,
    #[arg(long, required_unless_present = "grid")]
    mu2: Option<f64>,
    /// Share of pairs in the first subgroup.
    #[arg(long, default_value_t = 0.5)]
    pi1: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value = "wilcoxon")]
    score: String,
    /// Tabulate over an n × n grid of (mu1, mu2) instead.
    #[arg(long, conflicts_with_all = ["mu1", "mu2"])]
    grid: Option<usize>,
}

#[derive(Args)]
struct SplitArgs {
    /// normal:<shift>,<sd>, t:<dof>,<shift> or empirical:<path>.
    #[arg(long)]
    alt: String,
    #[arg(long, default_value = "wilcoxon")]
    score: String,
    /// Share of pairs held out for the reported analysis.
    #[arg(long)]
    zeta: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha_fp: f64,
    #[arg(long, default_value_t = 0.2)]
    alpha_fn: f64,
    /// Screening threshold on the kappa scale; with --alpha-tilde and --I
    /// also reports the error rates of that design.
    #[arg(long, requires_all = ["alpha_tilde", "n"])]
    kappa_tilde: Option<f64>,
    #[arg(long)]
    alpha_tilde: Option<f64>,
    #[arg(long = "I")]
    n: Option<f64>,
}

#[derive(Args)]
struct ScreenArgs {
    /// CSV of outcomes by pairs.
    #[arg(long)]
    data: PathBuf,
    /// wide, long or raw.
    #[arg(long, default_value = "wide")]
    format: String,
    #[arg(long, default_value = "wilcoxon")]
    score: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value = "greater")]
    tail: String,
    /// approx, exact, mc or mc:<draws>.
    #[arg(long, default_value = "approx")]
    method: String,
}

#[derive(Args)]
struct QqArgs {
    #[command(flatten)]
    screen: ScreenArgs,
    /// Emit histogram bins of this width instead of Q-Q points.
    #[arg(long)]
    bins: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    /// table2, table3, table4, fig1, fig2, appB or beta_table.
    job: String,
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated sample sizes (`inf` allowed where the job has a limit).
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    draws: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(invalid("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| invalid(&e.to_string()))?;
    }
    let report = match &cli.command {
        Command::Value(a) => value(a, cli.seed)?,
        Command::Table(a) => table(a, cli.seed)?,
        Command::Power(a) => power_cmd(a, cli.seed)?,
        Command::DesignSensitivity(a) => design_sensitivity(a, cli.seed)?,
        Command::ChooseScore(a) => choose(a, cli.seed)?,
        Command::Samplesize(a) => samplesize(a)?,
        Command::SplitDesign(a) => split_design(a, cli.seed)?,
        Command::Screen(a) => screen_cmd(a, cli.seed)?,
        Command::Qq(a) => qq(a, cli.seed)?,
        Command::Simulate(a) => simulate(a, cli.seed)?,
    };
    let format = cli.output.unwrap_or_else(|| report.default_format());
    match &cli.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            report.write(format, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            report.write(format, &mut lock)?;
        }
    }
    Ok(())
}

fn invalid(msg: &str) -> Error {
    Error::Domain(msg.to_string())
}

fn parse_score(s: &str) -> Result<ScoreSpec, Error> {
    let spec: ScoreSpec = s.parse()?;
    spec.validate()?;
    Ok(spec)
}

fn check_alpha(alpha: f64) -> Result<(), Error> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(&format!("--alpha must lie in (0, 1), got {alpha}")))
    }
}

fn parse_list(s: &str, flag: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| invalid(&format!("{flag}: `{p}` is not a number"))))
        .collect()
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("results serialize to JSON")
}

/// Finite numbers as JSON numbers, infinities as strings.
fn size_value(n: f64) -> Value {
    if n.is_finite() {
        json!(n)
    } else {
        json!("inf")
    }
}

fn sim_settings(seed: u64) -> SimSettings {
    SimSettings { seed, ..SimSettings::default() }
}

struct Dataset {
    spec: ScoreSpec,
    method: Method,
    d: PairDiffs,
}

fn load_dataset(a: &DataArgs, seed: u64) -> Result<Dataset, Error> {
    let spec = parse_score(&a.score)?;
    check_alpha(a.alpha)?;
    let method = Method::parse(&a.method, seed)?;
    let d = load_pairs(&a.data)?;
    Ok(Dataset { spec, method, d })
}

fn value(a: &ValueArgs, seed: u64) -> Result<Report, Error> {
    let tail: Tail = a.tail.parse()?;
    let ds = load_dataset(&a.data, seed)?;
    let sv = score_vector(ds.spec, &ds.d)?;
    let r = sensitivity_value(&sv, &ds.d, a.data.alpha, tail, ds.method, a.tol)?;
    let mut v = to_value(&r);
    if let Value::Object(map) = &mut v {
        map.insert("score".into(), json!(ds.spec.to_string()));
        map.insert("pairs".into(), json!(ds.d.len()));
        map.insert("seed".into(), json!(seed));
    }
    Ok(Report::Record(v))
}

fn table(a: &TableArgs, seed: u64) -> Result<Report, Error> {
    let tail: Tail = a.tail.parse()?;
    let gammas = parse_list(&a.gammas, "--gammas")?;
    let ds = load_dataset(&a.data, seed)?;
    let sv = score_vector(ds.spec, &ds.d)?;
    let t = statistic(&sv, &ds.d)?;
    let rows = sensitivity_table(&sv, &ds.d, &gammas, ds.method, tail)?;
    Ok(Report::Rows(Rows {
        comments: vec![
            ("score".into(), ds.spec.to_string()),
            ("tail".into(), tail.as_str().into()),
            ("method".into(), ds.method.to_string()),
            ("statistic".into(), t.to_string()),
            ("effective_I".into(), sv.effective_i.to_string()),
            ("seed".into(), seed.to_string()),
        ],
        columns: ["gamma", "p_lower", "p_upper"].map(String::from).to_vec(),
        rows: rows.iter().map(|b| vec![json!(b.gamma), json!(b.p_lower), json!(b.p_upper)]).collect(),
        json: object([
            ("score", json!(ds.spec.to_string())),
            ("tail", json!(tail.as_str())),
            ("method", json!(ds.method.to_string())),
            ("statistic", json!(t)),
            ("effective_I", json!(sv.effective_i)),
            ("seed", json!(seed)),
            ("bounds", to_value(&rows)),
        ]),
    }))
}

struct AltSetup {
    alt: AltModel,
    spec: ScoreSpec,
}

fn alt_setup(alt: &str, score: &str) -> Result<AltSetup, Error> {
    let spec = parse_score(score)?;
    let alt = AltModel::parse(alt)?;
    Ok(AltSetup { alt, spec })
}

fn law_fields(law: &AsymptoticLaw) -> Vec<(&'static str, Value)> {
    vec![
        ("mu_f", json!(law.mu_f)),
        ("design_sensitivity", json!(law.design_sensitivity)),
        ("sigma_f_sq", json!(law.sigma_f_sq)),
        ("sigma_q_sq", json!(law.sigma_q_sq)),
        ("provenance", to_value(&law.provenance)),
    ]
}

fn power_cmd(a: &PowerArgs, seed: u64) -> Result<Report, Error> {
    check_alpha(a.alt.alpha)?;
    if !(a.gamma >= 1.0 && a.gamma.is_finite()) {
        return Err(invalid(&format!("--gamma must be at least 1, got {}", a.gamma)));
    }
    let s = alt_setup(&a.alt.alt, &a.alt.score)?;
    let law = law_for(s.spec, &s.alt, &sim_settings(seed))?;
    let pc = power_check(&s.alt, s.spec, a.n, a.gamma, a.alt.alpha, a.reps, &Rng::new(seed, 0))?;
    let mut fields = vec![
        ("alt", json!(s.alt.to_string())),
        ("score", json!(s.spec.to_string())),
        ("I", json!(a.n)),
        ("gamma", json!(a.gamma)),
        ("alpha", json!(a.alt.alpha)),
        ("simulated", json!(pc.simulated)),
        ("simulated_se", json!(pc.simulated_se)),
        ("eq9", json!(pc.eq9)),
        ("eq10", json!(pc.eq10)),
        ("no_constant", json!(pc.no_constant)),
        ("replications", json!(pc.replications)),
        ("seed", json!(pc.seed)),
    ];
    fields.extend(law_fields(&law));
    Ok(Report::Record(object(fields)))
}

fn design_sensitivity(a: &LawArgs, seed: u64) -> Result<Report, Error> {
    check_alpha(a.alt.alpha)?;
    let s = alt_setup(&a.alt.alt, &a.alt.score)?;
    let law = law_for(s.spec, &s.alt, &sim_settings(seed))?;
    let mut fields = vec![("alt", json!(s.alt.to_string())), ("score", json!(s.spec.to_string()))];
    fields.extend(law_fields(&law));
    if let Some(n) = a.n {
        let asymptotic = kappa_law_asymptotic(&law, a.alt.alpha, n)?;
        let finite = kappa_law_finite(&law, a.alt.alpha, n)?;
        fields.extend([
            ("I", size_value(n)),
            ("alpha", json!(a.alt.alpha)),
            ("kappa_center", json!(finite.center)),
            ("kappa_sd", json!(finite.sd)),
            ("kappa_center_asymptotic", json!(asymptotic.center)),
            ("kappa_sd_asymptotic", json!(asymptotic.sd)),
        ]);
    }
    fields.push(("seed", json!(seed)));
    Ok(Report::Record(object(fields)))
}

fn choose(a: &ChooseArgs, seed: u64) -> Result<Report, Error> {
    check_alpha(a.alpha)?;
    let summary: Summary = a.summary.parse()?;
    let candidates = match &a.scores {
        Some(list) => list.split(';').map(parse_score).collect::<Result<Vec<_>, _>>()?,
        None => ustat_candidates(),
    };
    let alt = AltModel::parse(&a.alt)?;
    let r = choose_score(&candidates, &alt, a.n, a.alpha, summary, &sim_settings(seed))?;
    let columns = ["score", "mu_f", "sigma_q_sq", "sigma_f_sq", "center", "sd", "summary", "rank"];
    Ok(Report::Rows(Rows {
        comments: vec![
            ("alt".into(), r.alt.clone()),
            ("I".into(), a.n.to_string()),
            ("alpha".into(), a.alpha.to_string()),
            ("summary".into(), a.summary.clone()),
            ("seed".into(), seed.to_string()),
        ],
        columns: columns.map(String::from).to_vec(),
        rows: r
            .rows
            .iter()
            .map(|c| {
                vec![
                    json!(c.spec.to_string()),
                    json!(c.mu_f),
                    json!(c.sigma_q_sq),
                    json!(c.sigma_f_sq),
                    json!(c.center),
                    json!(c.sd),
                    json!(c.summary),
                    json!(c.rank),
                ]
            })
            .collect(),
        json: object([("report", to_value(&r)), ("I", size_value(a.n)), ("seed", json!(seed))]),
    }))
}

fn samplesize(a: &SampleSizeArgs) -> Result<Report, Error> {
    check_alpha(a.alpha)?;
    let sq = sigma_q_sq(parse_score(&a.score)?)?;
    if let Some(points) = a.grid {
        let cells = critical_size_grid(a.pi1, a.alpha, sq, points)?;
        return Ok(Report::Rows(Rows {
            comments: vec![
                ("pi1".into(), a.pi1.to_string()),
                ("alpha".into(), a.alpha.to_string()),
                ("sigma_q_sq".into(), sq.to_string()),
            ],
            columns: ["mu_f1", "mu_f2", "preferred", "I_star"].map(String::from).to_vec(),
            rows: cells
                .iter()
                .map(|c| vec![json!(c.mu_f1), json!(c.mu_f2), json!(c.preferred), json!(c.i_star)])
                .collect(),
            json: object([("pi1", json!(a.pi1)), ("alpha", json!(a.alpha)), ("cells", to_value(&cells))]),
        }));
    }
    let sub = SubgroupSpec {
        mu_f1: a.mu1.expect("clap requires mu1"),
        mu_f2: a.mu2.expect("clap requires mu2"),
        pi1: a.pi1,
        alpha: a.alpha,
        sigma_q_sq: sq,
    };
    let c = critical_sample_size(&sub)?;
    Ok(Report::Record(object([
        ("mu_f1", json!(sub.mu_f1)),
        ("mu_f2", json!(sub.mu_f2)),
        ("pi1", json!(sub.pi1)),
        ("pooled_mu_f", json!(sub.pooled_mu())),
        ("alpha", json!(sub.alpha)),
        ("sigma_q_sq", json!(sq)),
        ("I_star", json!(c.i_star)),
        ("eta_star", json!(c.eta_star)),
    ])))
}

fn split_design(a: &SplitArgs, seed: u64) -> Result<Report, Error> {
    let s = alt_setup(&a.alt, &a.score)?;
    let law = law_for(s.spec, &s.alt, &sim_settings(seed))?;
    let split = SplitSpec {
        zeta: a.zeta,
        kappa_tilde: a.kappa_tilde.unwrap_or(0.75),
        alpha_tilde: a.alpha_tilde.unwrap_or(a.alpha_fp),
        alpha_fp: a.alpha_fp,
        alpha_fn: a.alpha_fn,
        law,
    };
    let min = split_minimum_sample(&split)?;
    let mut fields = vec![
        ("alt", json!(s.alt.to_string())),
        ("score", json!(s.spec.to_string())),
        ("zeta", json!(a.zeta)),
        ("alpha_fp", json!(a.alpha_fp)),
        ("alpha_fn", json!(a.alpha_fn)),
        ("mu_f", json!(law.mu_f)),
        ("sigma_f_sq", json!(law.sigma_f_sq)),
        ("required_screening_pairs", json!(min.required_screening_pairs)),
        ("required_total_pairs", json!(min.required_screening_pairs / (1.0 - a.zeta))),
        ("limit_alpha_tilde", json!(min.alpha_tilde)),
        ("limit_kappa_tilde", json!(min.kappa_tilde)),
    ];
    if let (Some(k), Some(at), Some(n)) = (a.kappa_tilde, a.alpha_tilde, a.n) {
        let rates = split_rates(&split, n)?;
        fields.extend([
            ("I", json!(n)),
            ("kappa_tilde", json!(k)),
            ("alpha_tilde", json!(at)),
            ("fpr", json!(rates.fpr)),
            ("fnr", json!(rates.fnr)),
        ]);
    }
    fields.push(("seed", json!(seed)));
    Ok(Report::Record(object(fields)))
}

fn run_screen(a: &ScreenArgs, seed: u64) -> Result<ScreeningTable, Error> {
    let format: InputFormat = a.format.parse()?;
    let spec = parse_score(&a.score)?;
    check_alpha(a.alpha)?;
    let tail: Tail = a.tail.parse()?;
    let method = Method::parse(&a.method, seed)?;
    let m = load_matrix(&a.data, format)?;
    screen(&m, spec, a.alpha, tail, method)
}

fn screen_comments(t: &ScreeningTable, seed: u64) -> Vec<(String, String)> {
    let mut c = vec![
        ("score".into(), t.score.to_string()),
        ("alpha".into(), t.alpha.to_string()),
        ("tail".into(), t.tail.as_str().into()),
        ("method".into(), t.method.to_string()),
        ("seed".into(), seed.to_string()),
    ];
    if let Some(r) = t.null_reference {
        c.push(("null_center".into(), r.center.to_string()));
        c.push(("null_sd".into(), r.sd.to_string()));
        c.push(("median_effective_I".into(), r.median_effective_i.to_string()));
    }
    c
}

fn screen_cmd(a: &ScreenArgs, seed: u64) -> Result<Report, Error> {
    let t = run_screen(a, seed)?;
    let columns = ["outcome", "effective_I", "T", "kappa_greater", "kappa_less", "kappa_two_sided", "gamma_trunc", "rank", "flags"];
    let rows = t
        .ranked()
        .into_iter()
        .map(|r| {
            vec![
                json!(r.outcome),
                json!(r.effective_i),
                json!(r.statistic),
                json!(r.kappa_greater),
                json!(r.kappa_less),
                json!(r.kappa_two_sided),
                json!(r.gamma_trunc),
                json!(r.rank),
                json!(r.flags.join(";")),
            ]
        })
        .collect();
    Ok(Report::Rows(Rows {
        comments: screen_comments(&t, seed),
        columns: columns.map(String::from).to_vec(),
        rows,
        json: to_value(&t),
    }))
}

fn qq(a: &QqArgs, seed: u64) -> Result<Report, Error> {
    if let Some(w) = a.bins {
        if !(w > 0.0 && w <= 1.0) {
            return Err(invalid(&format!("--bins must lie in (0, 1], got {w}")));
        }
    }
    let t = run_screen(&a.screen, seed)?;
    let comments = screen_comments(&t, seed);
    if let Some(w) = a.bins {
        let bins = histogram_bins(&t, w)?;
        return Ok(Report::Rows(Rows {
            comments,
            columns: ["lo", "hi", "count"].map(String::from).to_vec(),
            rows: bins.iter().map(|b| vec![json!(b.lo), json!(b.hi), json!(b.count)]).collect(),
            json: object([("null_reference", to_value(&t.null_reference)), ("bins", to_value(&bins))]),
        }));
    }
    let points = qq_data(&t)?;
    let reference = t.null_reference.expect("q-q data implies analysed outcomes");
    Ok(Report::Rows(Rows {
        comments,
        columns: ["theoretical", "observed", "reference"].map(String::from).to_vec(),
        rows: points
            .iter()
            .map(|p| vec![json!(p.theoretical), json!(p.observed), json!(reference.center + reference.sd * p.theoretical)])
            .collect(),
        json: object([("null_reference", to_value(&reference)), ("points", to_value(&points))]),
    }))
}

fn simulate(a: &SimulateArgs, seed: u64) -> Result<Report, Error> {
    let sizes = match &a.sizes {
        Some(s) => Some(parse_list(s, "--sizes")?),
        None => None,
    };
    let job = SimJob::new(&a.job, JobParams { sizes, reps: a.reps, alpha: a.alpha, draws: a.draws })?;
    let started = Instant::now();
    let out = run_job(&job, &Rng::new(seed, 0))?;
    eprintln!("{}: {:.2}s", a.job, started.elapsed().as_secs_f64());
    let t = out.table;
    let m = &t.metadata;
    let mut comments = vec![("job".to_string(), m.job.clone()), ("seed".to_string(), m.seed.to_string())];
    if let Some(r) = m.replications {
        comments.push(("replications".into(), r.to_string()));
    }
    if let Some(s) = &m.summary {
        comments.push(("summary".into(), s.clone()));
    }
    comments.extend(m.params.iter().map(|(k, v)| (k.clone(), report::cell(v, None))));
    Ok(Report::Rows(Rows {
        comments,
        columns: t.columns.clone(),
        rows: t.rows.iter().map(|r| r.iter().map(to_value).collect()).collect(),
        json: to_value(&t),
    }))
}
