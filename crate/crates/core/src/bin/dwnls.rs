use clap::Parser;

fn main() {
    let cli = dwnls::cli::Cli::parse();
    std::process::exit(dwnls::cli::run(cli));
}
