use clap::Parser;

fn main() {
    let cli = motordev_cli::args::Cli::parse();
    std::process::exit(motordev_cli::dispatch(&cli.command));
}
