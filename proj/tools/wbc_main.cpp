#include <cstdio>
int main() { std::puts("wbc placeholder"); return 0; }
