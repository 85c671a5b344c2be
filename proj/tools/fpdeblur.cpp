// Placeholder until the pipeline subcommands land.
int main() { return 0; }
