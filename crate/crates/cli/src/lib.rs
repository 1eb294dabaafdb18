//! Experiment runner behind the `fairlabels` binary.

pub mod args;
pub mod experiment;
pub mod output;

use fairlabels::{ErrorClass, Result};

use args::{Cli, Command};

/// Process exit status for a failure of the given class.
pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numerical => 4,
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Baseline(a) => experiment::cmd_baseline(a).map(drop),
        Command::Train(a) => experiment::cmd_train(a).map(drop),
        Command::Eval(a) => experiment::cmd_eval(a).map(drop),
        Command::Sweep(a) => experiment::cmd_sweep(a).map(drop),
        Command::Synth(a) => experiment::cmd_synth(a).map(drop),
    }
}
