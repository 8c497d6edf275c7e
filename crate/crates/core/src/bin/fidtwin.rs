fn main() {
    std::process::exit(fidtwin::cli::run(std::env::args_os()));
}
