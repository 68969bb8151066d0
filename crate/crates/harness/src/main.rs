fn main() {
    std::process::exit(hitnet_harness::cli::cli_main(std::env::args_os()));
}
