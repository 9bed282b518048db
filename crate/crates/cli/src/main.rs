fn main() {
    std::process::exit(szbf_cli::run(std::env::args_os()));
}
