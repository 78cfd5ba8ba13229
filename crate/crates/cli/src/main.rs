use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bilevel_core::expr::{parse, Compiled};
use bilevel_core::games::{correspondence_report, GameTree};
use bilevel_core::lower::image_family;
use bilevel_core::model::{Overrides, PsiMode};
use bilevel_core::report::{render_game, render_relations, render_robust, render_solve, render_suite, render_symbolic_game, Format};
use bilevel_core::robust::{verify_triangle, UncertainProblem};
use bilevel_core::solutions::{analyze, Concept};
use bilevel_core::verify::run_goldens;
use bilevel_core::Instance;
use clap::{Args, Parser, Subcommand};

/// Solution concepts of bilevel programs on leader grids.
#[derive(Parser)]
#[command(name = "bilevel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide every solution concept for a problem file.
    Solve(Run),
    /// Pairwise set-order table of the image family.
    Relations(Run),
    /// Run the implication matrix and golden statements on a file or directory.
    Verify(Run),
    /// Equilibria of a finite game (`.game`) or a continuous game given as a problem file.
    Game(Run),
    /// Robust counterparts and their bilevel reformulations.
    Robust(Run),
}

#[derive(Args)]
struct Run {
    input: PathBuf,
    /// Leader grid step for every leader variable.
    #[arg(long)]
    grid_step: Option<f64>,
    /// Comma-separated radius schedule, e.g. `1/3,0.5`.
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<String>>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Solution-set backend: grid or symbolic.
    #[arg(long)]
    psi: Option<String>,
    /// Comma-separated concept names, or `all`.
    #[arg(long, default_value = "all")]
    concepts: String,
    #[arg(long, default_value = "json")]
    format: String,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn number(text: &str) -> Result<f64, Failure> {
    let e = parse(text.trim()).map_err(|e| Failure(format!("radius `{text}`: {e}")))?;
    let v = Compiled::<f64>::compile(&e, &[], &HashMap::new())?.eval(&[])?;
    Ok(v)
}

impl Run {
    fn overrides(&self) -> Result<Overrides, Failure> {
        let psi_mode = match self.psi.as_deref() {
            None => None,
            Some("grid") => Some(PsiMode::Grid),
            Some("symbolic") => Some(PsiMode::Symbolic),
            Some(other) => return Err(Failure(format!("unknown psi backend `{other}` (grid, symbolic)"))),
        };
        let radii = match &self.radii {
            None => None,
            Some(rs) => Some(rs.iter().map(|r| number(r)).collect::<Result<Vec<_>, _>>()?),
        };
        Ok(Overrides { grid_step: self.grid_step, radii, tolerance: self.tolerance, psi_mode })
    }

    fn concepts(&self) -> Result<Vec<Concept>, Failure> {
        if self.concepts == "all" {
            return Ok(Concept::ALL.to_vec());
        }
        self.concepts
            .split(',')
            .map(|c| Concept::from_name(c.trim()).ok_or_else(|| Failure(format!("unknown concept `{}`", c.trim()))))
            .collect()
    }

    fn format(&self) -> Result<Format, Failure> {
        self.format.parse().map_err(Failure)
    }

    fn read(&self) -> Result<String, Failure> {
        read(&self.input)
    }

    fn instance(&self) -> Result<Instance, Failure> {
        let text = self.read()?;
        let inst = Instance::load(&text).map_err(|e| located(&self.input, e))?;
        inst.with_overrides(&self.overrides()?).map_err(|e| located(&self.input, e))
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Failure(format!("{}: file not found", path.display())),
        _ => Failure(format!("{}: {e}", path.display())),
    })
}

fn located(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure(format!("{}: {e}", path.display()))
}

/// Report text and whether the run found violations.
fn execute(cmd: &Command) -> Result<(String, bool), Failure> {
    match cmd {
        Command::Solve(run) => {
            let inst = run.instance()?;
            let fam = image_family(&inst).map_err(|e| located(&run.input, e))?;
            let rep = analyze(&inst, &fam).map_err(|e| located(&run.input, e))?;
            Ok((render_solve(&inst, &fam, &rep, &run.concepts()?, run.format()?), false))
        }
        Command::Relations(run) => {
            let inst = run.instance()?;
            let fam = image_family(&inst).map_err(|e| located(&run.input, e))?;
            Ok((render_relations(&fam, run.format()?), false))
        }
        Command::Verify(run) => {
            if !run.input.exists() {
                return Err(Failure(format!("{}: file not found", run.input.display())));
            }
            let overrides = run.overrides()?;
            let format = run.format()?;
            let suite = run_goldens(&run.input, &|i: &Instance| i.with_overrides(&overrides))?;
            Ok((render_suite(&suite, format), !suite.passed()))
        }
        Command::Game(run) => {
            let format = run.format()?;
            if run.input.extension().and_then(|e| e.to_str()) == Some("game") {
                let g = GameTree::parse(&run.read()?).map_err(|e| located(&run.input, e))?;
                let c = correspondence_report(&g).map_err(|e| located(&run.input, e))?;
                Ok((render_game(&g, &c, format), false))
            } else {
                let inst = run.instance()?;
                let fam = image_family(&inst).map_err(|e| located(&run.input, e))?;
                let rep = analyze(&inst, &fam).map_err(|e| located(&run.input, e))?;
                Ok((render_symbolic_game(&inst, &fam, &rep, format), false))
            }
        }
        Command::Robust(run) => {
            let p = UncertainProblem::parse(&run.read()?).map_err(|e| located(&run.input, e))?;
            let v = verify_triangle::<f64>(&p).map_err(|e| located(&run.input, e))?;
            Ok((render_robust(&v, run.format()?), !v.holds()))
        }
    }
}

fn run_of(cmd: &Command) -> &Run {
    match cmd {
        Command::Solve(r) | Command::Relations(r) | Command::Verify(r) | Command::Game(r) | Command::Robust(r) => r,
    }
}

/// Writes through a sibling temporary file so a failed write leaves nothing behind.
fn write_output(path: &Path, text: &str) -> Result<(), Failure> {
    let name = path.file_name().ok_or_else(|| Failure(format!("{}: not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.partial", name.to_string_lossy()));
    fs::write(&tmp, text).map_err(|e| located(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        located(path, e)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = run_of(&cli.command);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = run.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = pool.install(|| execute(&cli.command)).and_then(|(text, violations)| {
        match &run.output {
            Some(path) => write_output(path, &text)?,
            None => print!("{text}"),
        }
        Ok(violations)
    });
    match outcome {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
