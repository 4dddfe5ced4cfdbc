#include <cstdio>
int main() { std::puts("regain cli placeholder"); return 0; }
