use clap::Parser;

fn main() {
    let cli = lrq_cli::Cli::parse();
    std::process::exit(lrq_cli::run(cli));
}
