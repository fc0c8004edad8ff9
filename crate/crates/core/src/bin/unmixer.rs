fn main() {
    std::process::exit(unmixer::cli::run(std::env::args_os()));
}
