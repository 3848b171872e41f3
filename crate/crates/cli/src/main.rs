fn main() {
    std::process::exit(tabsync_cli::run(std::env::args_os()));
}
