use clap::Parser;

fn main() {
    let cli = ost_cli::Cli::parse();
    std::process::exit(ost_cli::run(cli));
}
