use clap::Parser;

fn main() {
    let args = lrperc::cli::Args::parse();
    std::process::exit(lrperc::cli::main_with(args));
}
