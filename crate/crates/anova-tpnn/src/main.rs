use anova_tpnn::cli::{self, GlobalOpts};
use anova_tpnn::data::SyntheticKind;
use anova_tpnn::error::Error;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    std::process::exit(run(&args));
}

struct Parsed {
    command: String,
    flags: std::collections::BTreeMap<String, String>,
    opts: GlobalOpts,
}

fn parse(args: &[String]) -> Result<Parsed, String> {
    if args.is_empty() {
        return Err("missing command".into());
    }
    let command = args[0].clone();
    let mut flags = std::collections::BTreeMap::new();
    let mut opts = GlobalOpts::default();
    let mut i = 1;
    while i < args.len() {
        let arg = &args[i];
        if arg == "--no-timestamp" {
            opts.no_timestamp = true;
            i += 1;
            continue;
        }
        if let Some(name) = arg.strip_prefix("--") {
            let value = args
                .get(i + 1)
                .ok_or_else(|| format!("flag --{name} needs a value"))?
                .clone();
            match name {
                "seed" => {
                    opts.seed = Some(value.parse().map_err(|_| format!("bad --seed '{value}'"))?)
                }
                "threads" => {
                    opts.threads =
                        Some(value.parse().map_err(|_| format!("bad --threads '{value}'"))?)
                }
                _ => {
                    flags.insert(name.to_string(), value);
                }
            }
            i += 2;
        } else {
            return Err(format!("unexpected argument '{arg}'"));
        }
    }
    Ok(Parsed {
        command,
        flags,
        opts,
    })
}

fn required<'a>(p: &'a Parsed, name: &str) -> Result<&'a str, String> {
    p.flags
        .get(name)
        .map(|s| s.as_str())
        .ok_or_else(|| format!("{} requires --{name}", p.command))
}

fn run(args: &[String]) -> i32 {
    let parsed = match parse(args) {
        Ok(p) => p,
        Err(message) => {
            eprintln!("error: {message}\n");
            cli::print_usage(std::io::stderr());
            return 1;
        }
    };
    match dispatch(&parsed) {
        Ok(()) => 0,
        Err(Dispatch::Usage(message)) => {
            eprintln!("error: {message}\n");
            cli::print_usage(std::io::stderr());
            1
        }
        Err(Dispatch::Lib(err)) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

enum Dispatch {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Dispatch {
    fn from(e: Error) -> Self {
        Dispatch::Lib(e)
    }
}

fn dispatch(p: &Parsed) -> Result<(), Dispatch> {
    let usage = |m: String| Dispatch::Usage(m);
    match p.command.as_str() {
        "train" => {
            let config = required(p, "config").map_err(usage)?;
            cli::cmd_train(config, &p.opts)?;
        }
        "predict" => {
            let model = required(p, "model").map_err(usage)?;
            let data = required(p, "data").map_err(usage)?;
            let out = required(p, "out").map_err(usage)?;
            cli::cmd_predict(model, data, out)?;
        }
        "explain" => {
            let model = required(p, "model").map_err(usage)?;
            let data = required(p, "data").map_err(usage)?;
            let out = required(p, "out").map_err(usage)?;
            cli::cmd_explain(model, data, out)?;
        }
        "curves" => {
            let model = required(p, "model").map_err(usage)?;
            let out = required(p, "out").map_err(usage)?;
            let grid = flag_num(p, "grid", 101).map_err(usage)?;
            cli::cmd_curves(model, out, grid)?;
        }
        "importance" => {
            let model = required(p, "model").map_err(usage)?;
            let data = required(p, "data").map_err(usage)?;
            let out = required(p, "out").map_err(usage)?;
            cli::cmd_importance(model, data, out)?;
        }
        "stability" => {
            let config = required(p, "config").map_err(usage)?;
            let out = required(p, "out").map_err(usage)?;
            let reps = flag_num(p, "reps", 10).map_err(usage)?;
            cli::cmd_stability(config, reps, 0, out, &p.opts)?;
        }
        "purify" => {
            let model = required(p, "model").map_err(usage)?;
            let out = required(p, "out").map_err(usage)?;
            let grid = flag_num(p, "grid", 101).map_err(usage)?;
            cli::cmd_purify(model, out, grid)?;
        }
        "synth" => {
            let kind = match required(p, "kind").map_err(usage)? {
                "f1" | "F1" => SyntheticKind::F1,
                "f2" | "F2" => SyntheticKind::F2,
                "f3" | "F3" => SyntheticKind::F3,
                other => return Err(usage(format!("unknown synthetic kind '{other}'"))),
            };
            let out = required(p, "out").map_err(usage)?;
            let n = flag_num(p, "n", 15000).map_err(usage)?;
            let snr: f64 = match p.flags.get("snr") {
                Some(v) => v.parse().map_err(|_| usage(format!("bad --snr '{v}'")))?,
                None => 5.0,
            };
            let seed = p.opts.seed.unwrap_or(0);
            cli::cmd_synth(kind, n, snr, seed, out)?;
        }
        "bench" => {
            let config = required(p, "config").map_err(usage)?;
            let out = required(p, "out").map_err(usage)?;
            cli::cmd_bench(config, out, &p.opts)?;
        }
        "help" | "--help" | "-h" => {
            cli::print_usage(std::io::stdout());
        }
        other => return Err(usage(format!("unknown command '{other}'"))),
    }
    Ok(())
}

fn flag_num(p: &Parsed, name: &str, default: usize) -> Result<usize, String> {
    match p.flags.get(name) {
        Some(v) => v.parse().map_err(|_| format!("bad --{name} '{v}'")),
        None => Ok(default),
    }
}
