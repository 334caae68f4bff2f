// Acceptance suite placeholder; filled in once the unit layers pass.
int main() { return 0; }
