fn main() {
    std::process::exit(evhand::run_from(std::env::args_os()));
}
