extern char *gets(char *s);
extern int printf(const char *format, ...);

void echo(char *buf) {
  gets(buf);
  printf("%s", buf);
}

int main(void) {
  char line[256];
  echo(line);
  return 0;
}
