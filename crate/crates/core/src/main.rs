fn main() {
    std::process::exit(l2p_select::cli::run_cli(std::env::args_os()));
}
