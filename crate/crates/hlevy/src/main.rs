fn main() {
    std::process::exit(hlevy::cli::run(std::env::args_os()));
}
