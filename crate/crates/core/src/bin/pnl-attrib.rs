fn main() {
    std::process::exit(pnl_attrib::cli::run(std::env::args_os()));
}
