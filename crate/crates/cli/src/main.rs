use clap::Parser;

fn main() {
    let cli = hsbg_cli::Cli::parse();
    let cancel = hsbg_cli::install_signal_flag();
    std::process::exit(hsbg_cli::run(&cli, cancel));
}
