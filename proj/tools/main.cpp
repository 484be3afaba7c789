#include <cstdio>

int main() {
    std::puts("v4e: subcommands not wired up yet");
    return 2;
}
