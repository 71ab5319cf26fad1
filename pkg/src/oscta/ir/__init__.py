"""The simplified IR: textual front end, interpreter, CFG analyses and typing."""
