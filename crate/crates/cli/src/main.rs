fn main() {
    std::process::exit(l0sense_cli::cli_main(std::env::args_os().skip(1)));
}
