#include <cstdio>
int main() { std::printf("cli not yet wired\n"); return 1; }
