use clap::Parser;

use perfect_mcmc::error::Error;

mod cli;

// Exit codes: 2 for spec/flag/chain validation problems, 3 when a horizon
// or attempt budget is exhausted, 4 when an enumeration cap trips, 1 for
// internal errors.
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ParseError(_)
        | Error::ValidationError { .. }
        | Error::Invalid(_)
        | Error::ReducibleChain
        | Error::ZeroMassState { .. }
        | Error::NotStationary
        | Error::NotMonotone { .. }
        | Error::ZeroMassSeed { .. }
        | Error::ZeroBottomMass
        | Error::TooManyRecords { .. }
        | Error::EmptySample => 2,
        Error::HorizonExceeded { .. } | Error::MaxAttemptsExceeded { .. } => 3,
        Error::EnumerationTooLarge { .. }
        | Error::StateSpaceTooLarge { .. }
        | Error::PosetTooLarge { .. } => 4,
        _ => 1,
    }
}

fn main() {
    let cli = cli::Cli::parse();
    if let Err(e) = cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
