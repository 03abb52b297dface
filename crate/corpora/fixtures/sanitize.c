extern char *gets(char *s);
extern char *strcpy(char *dest, const char *src);

void cap(char *buf, char *out) {
  gets(buf);
  buf[63] = 0;
  strcpy(out, buf);
}
