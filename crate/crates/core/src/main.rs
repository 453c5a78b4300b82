use clap::{Parser, Subcommand};
use paleomag::cli_io::{cmd_audit, cmd_run, cmd_sweep, Outcome, EXIT_OK};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "paleomag", version, about = "Thermo-magneto-viscoelastic scenario runner")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write its run directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override a config value by dotted path, e.g. `material.h_c_high=0.1`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Re-audit a run directory from its snapshots.
    Audit { run_dir: PathBuf },
    /// Run one scenario per value of a parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    let Outcome { code, message } = match cli.cmd {
        Cmd::Run { config, out, set } => cmd_run(&config, &out, &set),
        Cmd::Audit { run_dir } => cmd_audit(&run_dir),
        Cmd::Sweep { config, param, values, out } => cmd_sweep(&config, &param, &values, &out),
    };
    if code == EXIT_OK {
        println!("{message}");
    } else {
        eprintln!("error: {message}");
    }
    std::process::exit(code);
}
