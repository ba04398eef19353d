fn main() {
    std::process::exit(fraktur_bench::cli::run(std::env::args_os()));
}
