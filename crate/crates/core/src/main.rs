fn main() {
    std::process::exit(mrfog::harness::cli_main(std::env::args_os()));
}
